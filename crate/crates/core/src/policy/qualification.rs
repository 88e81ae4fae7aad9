//! Research-organisation qualification for the mandatory research TDM exception.

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use super::types::{ProfitHandling, ResearcherProfile};
use crate::trace::DecisionTrace;

/// A limb of the research-organisation definition that a profile can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualificationCriterion {
    /// Research is not the entity's primary goal.
    PrimaryResearchGoal,
    /// Neither not-for-profit (or full reinvestment) nor a recognised public mission.
    NonProfitOrPublicMission,
    /// A commercial undertaking has decisive influence and preferential access.
    NoPreferentialCommercialControl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualificationResult {
    pub qualifies: bool,
    pub failed_criteria: Vec<QualificationCriterion>,
    pub trace: DecisionTrace,
}

pub fn qualify_research_organisation(profile: &ResearcherProfile) -> QualificationResult {
    let mut trace = DecisionTrace::new();
    let mut failed = Vec::new();

    let goal = profile.primary_goal_research;
    trace.fire(
        RuleId::OrgPrimaryGoal,
        &(profile.entity_kind, goal),
        if goal {
            "scientific research is the primary goal"
        } else {
            "scientific research is not the primary goal"
        },
    );
    if !goal {
        failed.push(QualificationCriterion::PrimaryResearchGoal);
    }

    let non_profit = matches!(
        profile.profit_handling,
        ProfitHandling::NotForProfit | ProfitHandling::ReinvestsProfits
    );
    trace.fire(
        RuleId::OrgProfitHandling,
        &profile.profit_handling,
        if non_profit {
            "not-for-profit or full reinvestment of profits"
        } else {
            "operates for profit"
        },
    );
    if !non_profit {
        trace.fire(
            RuleId::OrgPublicMission,
            &profile.public_interest_mission,
            if profile.public_interest_mission {
                "recognised public interest mission satisfies the alternative limb"
            } else {
                "no recognised public interest mission"
            },
        );
        if !profile.public_interest_mission {
            failed.push(QualificationCriterion::NonProfitOrPublicMission);
        }
    }

    let influence = profile.decisive_commercial_influence;
    trace.fire(
        RuleId::OrgDecisiveInfluence,
        &influence,
        if influence {
            "a commercial undertaking exercises decisive influence"
        } else {
            "no decisive commercial influence"
        },
    );
    if influence {
        let preferential = profile.preferential_commercial_access;
        trace.fire(
            RuleId::OrgPreferentialAccess,
            &preferential,
            if preferential {
                "influencing undertaking enjoys preferential access to results: not a research organisation"
            } else {
                "no preferential access to results"
            },
        );
        if preferential {
            failed.push(QualificationCriterion::NoPreferentialCommercialControl);
        }
    }

    QualificationResult {
        qualifies: failed.is_empty(),
        failed_criteria: failed,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::types::{EntityKind, Purpose};

    fn profile() -> ResearcherProfile {
        ResearcherProfile {
            entity_kind: EntityKind::University,
            primary_goal_research: true,
            profit_handling: ProfitHandling::NotForProfit,
            public_interest_mission: false,
            decisive_commercial_influence: false,
            preferential_commercial_access: false,
            purpose: Purpose::ScientificResearch,
            official_task_scope: None,
            commercialisation_planned: None,
        }
    }

    #[test]
    fn doctoral_student_at_university_qualifies() {
        let r = qualify_research_organisation(&profile());
        assert!(r.qualifies);
        assert!(r.failed_criteria.is_empty());
        assert!(!r.trace.is_empty());
    }

    #[test]
    fn commercial_entity_fails_profit_and_purpose() {
        let p = ResearcherProfile {
            entity_kind: EntityKind::Commercial,
            primary_goal_research: false,
            profit_handling: ProfitHandling::ForProfit,
            purpose: Purpose::Commercial,
            ..profile()
        };
        let r = qualify_research_organisation(&p);
        assert!(!r.qualifies);
        assert_eq!(
            r.failed_criteria,
            vec![
                QualificationCriterion::PrimaryResearchGoal,
                QualificationCriterion::NonProfitOrPublicMission
            ]
        );
    }

    #[test]
    fn influence_with_preferential_access_disqualifies() {
        let p = ResearcherProfile {
            entity_kind: EntityKind::NonprofitOther,
            decisive_commercial_influence: true,
            preferential_commercial_access: true,
            ..profile()
        };
        let r = qualify_research_organisation(&p);
        assert!(!r.qualifies);
        assert_eq!(
            r.failed_criteria,
            vec![QualificationCriterion::NoPreferentialCommercialControl]
        );
    }

    #[test]
    fn influence_without_preferential_access_still_qualifies() {
        let p = ResearcherProfile {
            decisive_commercial_influence: true,
            ..profile()
        };
        assert!(qualify_research_organisation(&p).qualifies);
    }

    #[test]
    fn public_mission_rescues_for_profit_entity() {
        let p = ResearcherProfile {
            entity_kind: EntityKind::ResearchInstitute,
            profit_handling: ProfitHandling::ForProfit,
            public_interest_mission: true,
            ..profile()
        };
        assert!(qualify_research_organisation(&p).qualifies);
    }

    #[test]
    fn exhaustive_against_definition() {
        let profits = [
            ProfitHandling::NotForProfit,
            ProfitHandling::ReinvestsProfits,
            ProfitHandling::ForProfit,
        ];
        for bits in 0..16u8 {
            for profit in profits {
                let p = ResearcherProfile {
                    primary_goal_research: bits & 1 != 0,
                    public_interest_mission: bits & 2 != 0,
                    decisive_commercial_influence: bits & 4 != 0,
                    preferential_commercial_access: bits & 8 != 0,
                    profit_handling: profit,
                    ..profile()
                };
                let expected = p.primary_goal_research
                    && (profit != ProfitHandling::ForProfit || p.public_interest_mission)
                    && !(p.decisive_commercial_influence && p.preferential_commercial_access);
                let r = qualify_research_organisation(&p);
                assert_eq!(r.qualifies, expected, "{p:?}");
                assert_eq!(r.failed_criteria.is_empty(), expected);
            }
        }
    }
}
