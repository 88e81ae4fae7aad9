//! Text-and-data-mining exception: research (Art. 3), general (Art. 4), or none.

use serde::{Deserialize, Serialize};

use super::qualification::{qualify_research_organisation, QualificationResult};
use super::rules::RuleId;
use super::types::{Purpose, ResearcherProfile};
use super::PolicyError;
use crate::optout::ReservationStatus;
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdmException {
    Article3,
    Article4,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionAllowance {
    VerificationRetention,
    NecessityBounded,
    None,
}

pub mod obligation {
    pub const SECURE_STORAGE: &str = "store_copies_with_appropriate_security";
    pub const PROPORTIONATE_SECURITY_MEASURES: &str = "accept_proportionate_platform_security_measures";
    pub const HONOUR_RESERVATIONS: &str = "monitor_and_honour_machine_readable_reservations";
    pub const DELETE_WHEN_UNNECESSARY: &str = "delete_copies_when_no_longer_necessary";
    pub const OBTAIN_LICENCE: &str = "obtain_licence_from_rightholder";
    pub const GDPR_APPLIES: &str = "gdpr_obligations_apply_independently";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TdmDecision {
    pub exception: TdmException,
    pub tos_override: bool,
    pub retention_allowance: RetentionAllowance,
    pub obligations: Vec<String>,
    pub trace: DecisionTrace,
}

impl TdmDecision {
    /// Whether any exception permits mining at all.
    pub fn permits_extraction(&self) -> bool {
        self.exception != TdmException::None
    }
}

/// Decide which TDM exception covers the mining.
///
/// `purpose` is the purpose of this particular mining activity, which may
/// differ from the profile's general purpose. Mixed purposes are treated as
/// commercial: planned commercialisation forfeits the research exception.
pub fn evaluate_tdm(
    profile: &ResearcherProfile,
    purpose: Purpose,
    reservation: &ReservationStatus,
    lawful_access: bool,
) -> Result<TdmDecision, PolicyError> {
    let mut trace = DecisionTrace::new();
    trace.fire(
        RuleId::TdmLawfulAccess,
        &lawful_access,
        if lawful_access {
            "lawful access to the content"
        } else {
            "no lawful access: no TDM exception can apply"
        },
    );
    if !lawful_access {
        return Err(PolicyError::UnlawfulAccess);
    }

    let QualificationResult {
        qualifies,
        trace: qualification_trace,
        ..
    } = qualify_research_organisation(profile);
    trace.extend(&qualification_trace);

    let scientific = purpose == Purpose::ScientificResearch;
    trace.fire(
        RuleId::TdmPurpose,
        &purpose,
        match purpose {
            Purpose::ScientificResearch => "scientific research purpose",
            Purpose::Commercial => "commercial purpose",
            Purpose::Mixed => "mixed purpose treated as commercial for the research exception",
        },
    );

    if qualifies && scientific {
        trace.fire(
            RuleId::TdmArticle3,
            &(qualifies, purpose),
            "research exception applies; contrary platform terms are unenforceable",
        );
        trace.fire(
            RuleId::StorageRetention,
            &TdmException::Article3,
            "copies may be retained for scientific research including verification of results",
        );
        return Ok(TdmDecision {
            exception: TdmException::Article3,
            tos_override: true,
            retention_allowance: RetentionAllowance::VerificationRetention,
            obligations: vec![
                obligation::SECURE_STORAGE.into(),
                obligation::PROPORTIONATE_SECURITY_MEASURES.into(),
                obligation::GDPR_APPLIES.into(),
            ],
            trace,
        });
    }

    trace.fire(
        RuleId::TdmReservation,
        reservation,
        if reservation.reserved {
            format!("rights expressly reserved ({:?})", reservation.basis)
        } else {
            "no machine-readable reservation".to_owned()
        },
    );
    if reservation.reserved {
        trace.fire(
            RuleId::TdmNone,
            &reservation.basis,
            "reservation excludes the general exception; mining requires a licence",
        );
        Ok(TdmDecision {
            exception: TdmException::None,
            tos_override: false,
            retention_allowance: RetentionAllowance::None,
            obligations: vec![obligation::OBTAIN_LICENCE.into(), obligation::GDPR_APPLIES.into()],
            trace,
        })
    } else {
        trace.fire(
            RuleId::TdmArticle4,
            &reservation.basis,
            "general exception applies; platform terms remain binding",
        );
        trace.fire(
            RuleId::StorageRetention,
            &TdmException::Article4,
            "copies retained only as long as necessary for mining",
        );
        Ok(TdmDecision {
            exception: TdmException::Article4,
            tos_override: false,
            retention_allowance: RetentionAllowance::NecessityBounded,
            obligations: vec![
                obligation::HONOUR_RESERVATIONS.into(),
                obligation::DELETE_WHEN_UNNECESSARY.into(),
                obligation::GDPR_APPLIES.into(),
            ],
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optout::ReservationBasis;
    use crate::policy::types::{EntityKind, ProfitHandling};

    fn university() -> ResearcherProfile {
        ResearcherProfile {
            entity_kind: EntityKind::University,
            primary_goal_research: true,
            profit_handling: ProfitHandling::NotForProfit,
            public_interest_mission: true,
            decisive_commercial_influence: false,
            preferential_commercial_access: false,
            purpose: Purpose::ScientificResearch,
            official_task_scope: Some("research".into()),
            commercialisation_planned: None,
        }
    }

    fn company() -> ResearcherProfile {
        ResearcherProfile {
            entity_kind: EntityKind::Commercial,
            primary_goal_research: false,
            profit_handling: ProfitHandling::ForProfit,
            public_interest_mission: false,
            purpose: Purpose::Commercial,
            official_task_scope: None,
            ..university()
        }
    }

    fn reserved() -> ReservationStatus {
        ReservationStatus {
            reserved: true,
            basis: ReservationBasis::RobotsDisallow,
            detail: "User-agent: * Disallow: /".into(),
        }
    }

    #[test]
    fn qualifying_org_gets_article3_over_reservation() {
        let d = evaluate_tdm(&university(), Purpose::ScientificResearch, &reserved(), true).unwrap();
        assert_eq!(d.exception, TdmException::Article3);
        assert!(d.tos_override);
        assert_eq!(d.retention_allowance, RetentionAllowance::VerificationRetention);
    }

    #[test]
    fn commercial_with_reservation_gets_none() {
        let d = evaluate_tdm(&company(), Purpose::Commercial, &reserved(), true).unwrap();
        assert_eq!(d.exception, TdmException::None);
        assert!(!d.tos_override);
        assert!(!d.permits_extraction());
    }

    #[test]
    fn commercial_without_reservation_gets_article4() {
        let d = evaluate_tdm(
            &company(),
            Purpose::Commercial,
            &ReservationStatus::none(),
            true,
        )
        .unwrap();
        assert_eq!(d.exception, TdmException::Article4);
        assert_eq!(d.retention_allowance, RetentionAllowance::NecessityBounded);
    }

    #[test]
    fn mixed_purpose_denied_research_exception() {
        let d = evaluate_tdm(&university(), Purpose::Mixed, &reserved(), true).unwrap();
        assert_eq!(d.exception, TdmException::None);
    }

    #[test]
    fn unlawful_access_is_an_error() {
        assert_eq!(
            evaluate_tdm(&university(), Purpose::ScientificResearch, &reserved(), false),
            Err(PolicyError::UnlawfulAccess)
        );
    }
}
