//! High-risk screening: do the nine WP29 criteria call for a DPIA?

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use super::types::{ProcessingContext, SubjectScale};
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wp29CriteriaSet {
    pub evaluation_scoring: bool,
    pub automated_decision_significant_effect: bool,
    pub systematic_monitoring: bool,
    pub sensitive_or_highly_personal: bool,
    pub large_scale: bool,
    pub matching_combining: bool,
    pub vulnerable_subjects: bool,
    pub innovative_use: bool,
    pub rights_or_service_prevention: bool,
}

impl Wp29CriteriaSet {
    pub const LEN: usize = 9;

    /// Criteria in WP29 order, paired with the rule that records them.
    pub fn flags(&self) -> [(RuleId, bool); Self::LEN] {
        [
            (RuleId::DpiaEvaluationScoring, self.evaluation_scoring),
            (RuleId::DpiaAutomatedDecision, self.automated_decision_significant_effect),
            (RuleId::DpiaSystematicMonitoring, self.systematic_monitoring),
            (RuleId::DpiaSensitive, self.sensitive_or_highly_personal),
            (RuleId::DpiaLargeScale, self.large_scale),
            (RuleId::DpiaMatching, self.matching_combining),
            (RuleId::DpiaVulnerable, self.vulnerable_subjects),
            (RuleId::DpiaInnovative, self.innovative_use),
            (RuleId::DpiaRightsPrevention, self.rights_or_service_prevention),
        ]
    }

    /// Build from a 9-bit mask, bit `i` being the `i`-th criterion in WP29 order.
    pub fn from_bits(bits: u16) -> Self {
        let b = |i: u16| bits & (1 << i) != 0;
        Wp29CriteriaSet {
            evaluation_scoring: b(0),
            automated_decision_significant_effect: b(1),
            systematic_monitoring: b(2),
            sensitive_or_highly_personal: b(3),
            large_scale: b(4),
            matching_combining: b(5),
            vulnerable_subjects: b(6),
            innovative_use: b(7),
            rights_or_service_prevention: b(8),
        }
    }

    pub fn count(&self) -> u32 {
        self.flags().iter().filter(|(_, on)| *on).count() as u32
    }

    /// Pre-fill the criteria that can be read off a processing context.
    /// Evaluation, automated decisions, monitoring and rights prevention are
    /// purpose-level facts and stay false unless the caller sets them.
    pub fn from_context(ctx: &ProcessingContext) -> Self {
        Wp29CriteriaSet {
            sensitive_or_highly_personal: ctx.special_category_possible,
            large_scale: ctx.subject_count_scale == SubjectScale::Large,
            matching_combining: ctx.combines_datasets,
            vulnerable_subjects: ctx.vulnerable_subjects,
            innovative_use: ctx.innovative_technology,
            evaluation_scoring: ctx.profiling_of_public_social_media,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DpiaStatus {
    NotRequired,
    Recommended,
    Required,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpiaRequirement {
    pub status: DpiaStatus,
    pub trigger_count: u32,
    pub trace: DecisionTrace,
}

pub fn assess_dpia_requirement(
    criteria: &Wp29CriteriaSet,
    context: &ProcessingContext,
) -> DpiaRequirement {
    let mut trace = DecisionTrace::new();
    for (rule, on) in criteria.flags() {
        if on {
            trace.fire(rule, &on, "criterion met");
        }
    }
    let count = criteria.count();
    let profiling = context.profiling_of_public_social_media;

    let status = if profiling {
        trace.fire(
            RuleId::DpiaProfilingSocialMedia,
            &profiling,
            "public social media data gathered for profiling: DPIA required regardless of count",
        );
        DpiaStatus::Required
    } else {
        match count {
            0 => DpiaStatus::NotRequired,
            1 => DpiaStatus::Recommended,
            _ => DpiaStatus::Required,
        }
    };
    let conclusion = match status {
        DpiaStatus::Required => format!("{count} criteria met: DPIA required"),
        DpiaStatus::Recommended => {
            format!("{count} criterion met: DPIA recommended, carried out nonetheless where uncertain")
        }
        DpiaStatus::NotRequired => format!("{count} criteria met: DPIA not required"),
    };
    trace.fire(RuleId::DpiaCount, &(count, profiling), conclusion);

    DpiaRequirement {
        status,
        trigger_count: count,
        trace,
    }
}
