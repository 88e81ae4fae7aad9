//! Legal decision engine. Every function here is pure and returns a decision
//! carrying a [`DecisionTrace`](crate::trace::DecisionTrace).

pub mod controllership;
pub mod distribution;
pub mod dpia;
pub mod extraction;
pub mod legal_basis;
pub mod qualification;
pub mod release;
pub mod rules;
pub mod safeguards;
pub mod tdm;
pub mod transfer;
pub mod types;

use thiserror::Error;

pub use controllership::{assess_controllership, ControllershipAssessment, ControllershipInputs, ControllershipRole};
pub use distribution::{
    check_distribution, load_rule_pack, DistributionDecision, PackRule, PlatformRulePack, RulePackSet, Verdict,
};
pub use dpia::{assess_dpia_requirement, DpiaRequirement, DpiaStatus, Wp29CriteriaSet};
pub use extraction::{assess_extraction, ExtractionChannel, ExtractionDecision, ExtractionVerdict, RateLimit};
pub use legal_basis::{
    run_lia, select_legal_basis, BalancingFactor, LegalBasis, LegalBasisDecision, LiaInputs, LiaLimb, LiaOutcome,
    SpecialCategoryCondition,
};
pub use qualification::{qualify_research_organisation, QualificationCriterion, QualificationResult};
pub use release::{assess_model_release, ModelReleaseDecision, ReleaseScope};
pub use rules::{manifest, RuleId, Tree};
pub use safeguards::{plan_transform, OutputLabel, TransformPlan};
pub use tdm::{evaluate_tdm, RetentionAllowance, TdmDecision, TdmException};
pub use transfer::{
    assess_transfer, TransferAssessment, TransferConfig, TransferFlags, TransferInstrument, TransferMechanism,
};
pub use types::{
    EntityKind, OutputKind, ProcessingContext, ProfitHandling, Purpose, Region, ResearcherProfile, Route,
    SubjectScale,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("basis {} is not available: {reason}", basis.as_str())]
    ForbiddenBasis { basis: LegalBasis, reason: String },
    #[error("interest statement is empty")]
    EmptyInterest,
    #[error("no lawful access to the content; no TDM exception applies")]
    UnlawfulAccess,
    #[error("no lawful transfer mechanism for {} -> {}", route.source, route.dest)]
    NoLawfulRoute { route: Route },
    #[error("unknown output kind: {0}")]
    UnknownOutputKind(String),
    #[error("no rule pack loaded{}", platform_id.as_deref().map(|p| format!(" for platform {p}")).unwrap_or_default())]
    MissingRulePack { platform_id: Option<String> },
    #[error("rule pack schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate rule for {output_kind} with conditions {conditions:?}")]
    DuplicateRule {
        output_kind: OutputKind,
        conditions: Vec<String>,
    },
    #[error("invalid researcher profile: {0}")]
    InvalidProfile(String),
    #[error("invalid processing context: {0}")]
    InvalidContext(String),
}

impl PolicyError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            PolicyError::ForbiddenBasis { .. } => "forbidden_basis",
            PolicyError::EmptyInterest => "empty_interest",
            PolicyError::UnlawfulAccess => "unlawful_access",
            PolicyError::NoLawfulRoute { .. } => "no_lawful_route",
            PolicyError::UnknownOutputKind(_) => "unknown_output_kind",
            PolicyError::MissingRulePack { .. } => "missing_rule_pack",
            PolicyError::SchemaViolation(_) => "schema_violation",
            PolicyError::DuplicateRule { .. } => "duplicate_rule",
            PolicyError::InvalidProfile(_) => "invalid_profile",
            PolicyError::InvalidContext(_) => "invalid_context",
        }
    }
}
