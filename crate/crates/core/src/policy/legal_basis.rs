//! Legal basis selection and the three-limb legitimate interest assessment.

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use super::types::{ProcessingContext, ResearcherProfile};
use super::PolicyError;
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LegalBasis {
    #[serde(rename = "consent_6_1_a")]
    Consent,
    #[serde(rename = "public_task_6_1_e")]
    PublicTask,
    #[serde(rename = "legitimate_interest_6_1_f")]
    LegitimateInterest,
}

impl LegalBasis {
    pub const ALL: [LegalBasis; 3] = [
        LegalBasis::Consent,
        LegalBasis::PublicTask,
        LegalBasis::LegitimateInterest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LegalBasis::Consent => "consent_6_1_a",
            LegalBasis::PublicTask => "public_task_6_1_e",
            LegalBasis::LegitimateInterest => "legitimate_interest_6_1_f",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpecialCategoryCondition {
    #[serde(rename = "art9_2_j")]
    ScientificResearch,
}

/// Safeguards attached to a basis. Tags are stable strings so they can be
/// matched against declared safeguards elsewhere in the pipeline.
pub mod safeguard {
    pub const ART89_MINIMISATION: &str = "art89_data_minimisation";
    pub const ART89_PSEUDONYMISATION: &str = "art89_pseudonymisation";
    pub const ART89_ETHICS_OVERSIGHT: &str = "art89_ethical_oversight";
    pub const LIA_DOCUMENTED: &str = "documented_lia";
    pub const PUBLIC_TASK_BASIS_IN_LAW: &str = "public_task_basis_in_law";
    pub const CONSENT_RECORDS: &str = "consent_records";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalBasisDecision {
    pub basis: LegalBasis,
    pub lia_required: bool,
    pub art9_condition: Option<SpecialCategoryCondition>,
    pub safeguards_required: Vec<String>,
    pub trace: DecisionTrace,
}

pub fn select_legal_basis(
    profile: &ResearcherProfile,
    context: &ProcessingContext,
    requested: Option<LegalBasis>,
) -> Result<LegalBasisDecision, PolicyError> {
    let mut trace = DecisionTrace::new();
    let within_task = profile.acts_within_official_task();
    trace.fire(
        RuleId::BasisEntityKind,
        &profile.entity_kind,
        format!("entity kind {:?}", profile.entity_kind),
    );
    trace.fire(
        RuleId::BasisOfficialTask,
        &profile.official_task_scope,
        if within_task {
            "processing falls within an official research task"
        } else {
            "no official task laid down in law"
        },
    );
    if let Some(req) = requested {
        trace.fire(RuleId::BasisRequested, &req, format!("requested {}", req.as_str()));
    }

    let basis = match requested {
        Some(LegalBasis::LegitimateInterest) if within_task => {
            return Err(PolicyError::ForbiddenBasis {
                basis: LegalBasis::LegitimateInterest,
                reason: format!(
                    "{} ({})",
                    RuleId::BasisPublicAuthorityBar.title(),
                    RuleId::BasisPublicAuthorityBar.citation()
                ),
            });
        }
        Some(LegalBasis::PublicTask) if !within_task => {
            return Err(PolicyError::ForbiddenBasis {
                basis: LegalBasis::PublicTask,
                reason: "public task requires a task laid down in law (GDPR Art. 6(3))".into(),
            });
        }
        Some(b) => b,
        None if within_task => LegalBasis::PublicTask,
        None => LegalBasis::LegitimateInterest,
    };

    let mut safeguards: Vec<String> = Vec::new();
    let (rule, conclusion) = match basis {
        LegalBasis::PublicTask => {
            safeguards.push(safeguard::PUBLIC_TASK_BASIS_IN_LAW.into());
            (RuleId::BasisPublicTask, "public task: Art. 6(1)(e)")
        }
        LegalBasis::LegitimateInterest => {
            safeguards.push(safeguard::LIA_DOCUMENTED.into());
            (
                RuleId::BasisLegitimateInterest,
                "legitimate interests: Art. 6(1)(f), documented LIA required",
            )
        }
        LegalBasis::Consent => {
            safeguards.push(safeguard::CONSENT_RECORDS.into());
            (RuleId::BasisConsent, "consent: Art. 6(1)(a)")
        }
    };
    trace.fire(rule, &(basis, within_task), conclusion);

    let special = context.special_category_possible;
    trace.fire(
        RuleId::BasisSpecialCategory,
        &special,
        if special {
            "special category data possible or inferable"
        } else {
            "no special category data"
        },
    );
    let art9_condition = if special {
        safeguards.extend(
            [
                safeguard::ART89_MINIMISATION,
                safeguard::ART89_PSEUDONYMISATION,
                safeguard::ART89_ETHICS_OVERSIGHT,
            ]
            .map(String::from),
        );
        trace.fire(
            RuleId::BasisResearchSpecialCategory,
            &special,
            "Art. 9(2)(j) scientific research condition with Art. 89(1) safeguards",
        );
        Some(SpecialCategoryCondition::ScientificResearch)
    } else {
        None
    };

    Ok(LegalBasisDecision {
        basis,
        lia_required: basis == LegalBasis::LegitimateInterest,
        art9_condition,
        safeguards_required: safeguards,
        trace,
    })
}

/// A factor in the balancing limb; positive weights favour the controller,
/// negative weights favour data subjects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancingFactor {
    pub description: String,
    pub weight: i32,
}

impl BalancingFactor {
    pub fn new(description: impl Into<String>, weight: i32) -> Self {
        BalancingFactor {
            description: description.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiaInputs {
    pub interest_statement: String,
    pub less_intrusive_alternative_exists: bool,
    #[serde(default)]
    pub balancing_factors: Vec<BalancingFactor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiaLimb {
    Legitimacy,
    Necessity,
    Balancing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiaOutcome {
    pub pass: bool,
    pub failing_limb: Option<LiaLimb>,
    pub controller_score: i64,
    pub subject_score: i64,
    pub trace: DecisionTrace,
}

/// Legitimacy, then necessity, then balancing; the first failing limb stops
/// the assessment. Balancing passes only when the controller's summed weight
/// strictly exceeds the data subjects'; a tie fails.
pub fn run_lia(inputs: &LiaInputs) -> Result<LiaOutcome, PolicyError> {
    let statement = inputs.interest_statement.trim();
    if statement.is_empty() {
        return Err(PolicyError::EmptyInterest);
    }
    let mut trace = DecisionTrace::new();
    trace.fire(RuleId::LiaLegitimacy, statement, "legitimate interest articulated");

    let controller: i64 = inputs
        .balancing_factors
        .iter()
        .filter(|f| f.weight > 0)
        .map(|f| i64::from(f.weight))
        .sum();
    let subjects: i64 = inputs
        .balancing_factors
        .iter()
        .filter(|f| f.weight < 0)
        .map(|f| -i64::from(f.weight))
        .sum();
    let outcome = |pass, failing_limb, trace| LiaOutcome {
        pass,
        failing_limb,
        controller_score: controller,
        subject_score: subjects,
        trace,
    };

    if inputs.less_intrusive_alternative_exists {
        trace.fire(
            RuleId::LiaNecessity,
            &true,
            "a less intrusive alternative achieves the purpose: processing not necessary",
        );
        return Ok(outcome(false, Some(LiaLimb::Necessity), trace));
    }
    trace.fire(RuleId::LiaNecessity, &false, "no less intrusive alternative");

    if controller > subjects {
        trace.fire(
            RuleId::LiaBalancing,
            &inputs.balancing_factors,
            format!("controller interests {controller} outweigh data subject interests {subjects}"),
        );
        Ok(outcome(true, None, trace))
    } else {
        trace.fire(
            RuleId::LiaBalancing,
            &inputs.balancing_factors,
            format!(
                "data subject interests {subjects} not outweighed by controller interests {controller}"
            ),
        );
        Ok(outcome(false, Some(LiaLimb::Balancing), trace))
    }
}
