//! Case inputs and the full decision sweep over them.
//!
//! `CaseInputs` is the single fact base behind a case. The CLI reads it from
//! a case file, the questionnaire builds it from answers, and the golden
//! runner loads it from the scenario. All three evaluate through
//! [`CaseInputs::assess`] or the per-decision methods below.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::optout::ReservationStatus;
use crate::policy::{
    assess_controllership, assess_dpia_requirement, assess_extraction, assess_model_release, assess_transfer,
    check_distribution, evaluate_tdm, plan_transform, qualify_research_organisation, select_legal_basis,
    ControllershipAssessment, ControllershipInputs, DistributionDecision, DpiaRequirement, ExtractionChannel,
    ExtractionDecision, LegalBasis, LegalBasisDecision, ModelReleaseDecision, OutputKind, PolicyError,
    ProcessingContext, Purpose, QualificationResult, ReleaseScope, ResearcherProfile, Route, RulePackSet,
    TdmDecision, TransferAssessment, TransferConfig, TransferInstrument, TransformPlan, Wp29CriteriaSet,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferInput {
    pub route: Route,
    #[serde(default)]
    pub recipient_dpf_certified: bool,
    #[serde(default)]
    pub scc_available: bool,
    #[serde(default)]
    pub bcr_available: bool,
    #[serde(default)]
    pub repetitive: bool,
    #[serde(default)]
    pub derogation_ground: Option<TransferInstrument>,
}

impl TransferInput {
    pub fn plain(route: Route) -> Self {
        TransferInput {
            route,
            recipient_dpf_certified: false,
            scc_available: false,
            bcr_available: false,
            repetitive: false,
            derogation_ground: None,
        }
    }
}

fn yes() -> bool {
    true
}

fn platform_authorised() -> ExtractionChannel {
    ExtractionChannel::PlatformAuthorised
}

fn public_scope() -> ReleaseScope {
    ReleaseScope::Public
}

fn no_reservation() -> ReservationStatus {
    ReservationStatus::none()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseInputs {
    pub profile: ResearcherProfile,
    pub context: ProcessingContext,
    #[serde(default)]
    pub controllership: ControllershipInputs,
    #[serde(default)]
    pub requested_basis: Option<LegalBasis>,
    /// WP29 criteria; pre-filled from the context when absent.
    #[serde(default)]
    pub wp29: Option<Wp29CriteriaSet>,
    #[serde(default = "no_reservation")]
    pub reservation: ReservationStatus,
    #[serde(default = "yes")]
    pub lawful_access: bool,
    /// Purpose of this mining activity; the profile's purpose when absent.
    #[serde(default)]
    pub tdm_purpose: Option<Purpose>,
    #[serde(default = "platform_authorised")]
    pub channel: ExtractionChannel,
    /// Transfer details; the context's cross-border routes with no
    /// instruments when empty.
    #[serde(default)]
    pub transfers: Vec<TransferInput>,
    #[serde(default = "yes")]
    pub has_direct_identifiers: bool,
    #[serde(default)]
    pub anonymity_claimed: bool,
    #[serde(default = "public_scope")]
    pub model_release_scope: ReleaseScope,
    /// Declared safeguard tags, e.g. `platform_permission`.
    #[serde(default)]
    pub safeguards: BTreeSet<String>,
    /// Outputs actually released in the Present stage.
    #[serde(default)]
    pub release: BTreeSet<OutputKind>,
}

impl CaseInputs {
    pub fn new(profile: ResearcherProfile, context: ProcessingContext) -> Self {
        CaseInputs {
            profile,
            context,
            controllership: ControllershipInputs::default(),
            requested_basis: None,
            wp29: None,
            reservation: ReservationStatus::none(),
            lawful_access: true,
            tdm_purpose: None,
            channel: ExtractionChannel::PlatformAuthorised,
            transfers: Vec::new(),
            has_direct_identifiers: true,
            anonymity_claimed: false,
            model_release_scope: ReleaseScope::Public,
            safeguards: BTreeSet::new(),
            release: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        self.profile.validate()?;
        self.context.validate()
    }

    pub fn wp29_criteria(&self) -> Wp29CriteriaSet {
        self.wp29.unwrap_or_else(|| Wp29CriteriaSet::from_context(&self.context))
    }

    pub fn mining_purpose(&self) -> Purpose {
        self.tdm_purpose.unwrap_or(self.profile.purpose)
    }

    pub fn transfer_inputs(&self) -> Vec<TransferInput> {
        if self.transfers.is_empty() {
            self.context.cross_border.iter().cloned().map(TransferInput::plain).collect()
        } else {
            self.transfers.clone()
        }
    }

    pub fn controllership(&self) -> ControllershipAssessment {
        assess_controllership(&self.controllership)
    }

    pub fn qualification(&self) -> QualificationResult {
        qualify_research_organisation(&self.profile)
    }

    pub fn legal_basis(&self) -> Result<LegalBasisDecision, PolicyError> {
        select_legal_basis(&self.profile, &self.context, self.requested_basis)
    }

    pub fn dpia(&self) -> DpiaRequirement {
        assess_dpia_requirement(&self.wp29_criteria(), &self.context)
    }

    pub fn tdm(&self) -> Result<TdmDecision, PolicyError> {
        evaluate_tdm(&self.profile, self.mining_purpose(), &self.reservation, self.lawful_access)
    }

    pub fn extraction(&self) -> Result<ExtractionDecision, PolicyError> {
        Ok(assess_extraction(self.channel, &self.tdm()?, &self.context))
    }

    pub fn transfer_decisions(&self, lists: &TransferConfig) -> Vec<Result<TransferAssessment, PolicyError>> {
        self.transfer_inputs()
            .iter()
            .map(|t| {
                let mut flags = lists.flags(&t.route, t.recipient_dpf_certified, t.scc_available, t.repetitive);
                flags.bcr_available = t.bcr_available;
                flags.derogation_ground = t.derogation_ground;
                assess_transfer(&t.route, &flags, lists)
            })
            .collect()
    }

    pub fn transform_plan(&self) -> TransformPlan {
        plan_transform(&self.context, self.has_direct_identifiers, self.anonymity_claimed)
    }

    /// Declared safeguards plus evidence earned while running the pipeline.
    pub fn safeguards_with(&self, evidence: &BTreeSet<String>) -> BTreeSet<String> {
        self.safeguards.union(evidence).cloned().collect()
    }

    pub fn model_release(
        &self,
        packs: &RulePackSet,
        evidence: &BTreeSet<String>,
    ) -> Result<ModelReleaseDecision, PolicyError> {
        assess_model_release(
            self.model_release_scope,
            packs.get(&self.context.platform_id),
            &self.tdm()?,
            &self.safeguards_with(evidence),
        )
    }

    pub fn distribution(
        &self,
        kind: OutputKind,
        packs: &RulePackSet,
        evidence: &BTreeSet<String>,
    ) -> Result<DistributionDecision, PolicyError> {
        let pack = packs.get(&self.context.platform_id).ok_or_else(|| PolicyError::MissingRulePack {
            platform_id: Some(self.context.platform_id.clone()),
        })?;
        check_distribution(kind, Some(pack), &self.tdm()?, &self.safeguards_with(evidence))
    }

    pub fn assess(&self, packs: &RulePackSet, lists: &TransferConfig, evidence: &BTreeSet<String>) -> CaseAssessment {
        let distribution = self
            .context
            .intended_outputs
            .iter()
            .map(|&k| (k, self.distribution(k, packs, evidence).into()))
            .collect();
        CaseAssessment {
            controllership: self.controllership(),
            qualification: self.qualification(),
            legal_basis: self.legal_basis().into(),
            dpia: self.dpia(),
            tdm: self.tdm().into(),
            extraction: self.extraction().into(),
            transfers: self.transfer_decisions(lists).into_iter().map(Outcome::from).collect(),
            transform: self.transform_plan(),
            model_release: self.model_release(packs, evidence).into(),
            distribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

impl From<&PolicyError> for ErrorInfo {
    fn from(e: &PolicyError) -> Self {
        ErrorInfo {
            code: e.code().into(),
            message: e.to_string(),
        }
    }
}

/// A decision or the reason none could be made.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Decided(T),
    Error(ErrorInfo),
}

impl<T> Outcome<T> {
    pub fn decided(&self) -> Option<&T> {
        match self {
            Outcome::Decided(t) => Some(t),
            Outcome::Error(_) => None,
        }
    }
}

impl<T> From<Result<T, PolicyError>> for Outcome<T> {
    fn from(r: Result<T, PolicyError>) -> Self {
        match r {
            Ok(t) => Outcome::Decided(t),
            Err(e) => Outcome::Error((&e).into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseAssessment {
    pub controllership: ControllershipAssessment,
    pub qualification: QualificationResult,
    pub legal_basis: Outcome<LegalBasisDecision>,
    pub dpia: DpiaRequirement,
    pub tdm: Outcome<TdmDecision>,
    pub extraction: Outcome<ExtractionDecision>,
    pub transfers: Vec<Outcome<TransferAssessment>>,
    pub transform: TransformPlan,
    pub model_release: Outcome<ModelReleaseDecision>,
    pub distribution: BTreeMap<OutputKind, Outcome<DistributionDecision>>,
}
