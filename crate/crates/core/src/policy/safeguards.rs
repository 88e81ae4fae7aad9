//! Transform-stage safeguard plan.

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use super::types::ProcessingContext;
use crate::trace::DecisionTrace;

pub mod measure {
    pub const MINIMISE_FIELDS: &str = "retain_only_justified_fields";
    pub const DROP_USERNAMES: &str = "drop_usernames";
    pub const HASH_IDS: &str = "hash_post_and_user_ids";
    pub const SCRUB_MENTIONS: &str = "scrub_inline_user_mentions";
    pub const GENERALISE_TIMESTAMPS: &str = "generalise_timestamps_to_week";
    pub const ACCESS_RESTRICTED_SENSITIVE: &str = "restrict_access_to_sensitive_fields";
    pub const KANON_AUDIT: &str = "audit_k_anonymity_on_quasi_identifiers";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLabel {
    Pseudonymised,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformPlan {
    pub measures: Vec<String>,
    /// Always pseudonymised: the engine never certifies anonymity.
    pub output_label: OutputLabel,
    pub warnings: Vec<String>,
    pub trace: DecisionTrace,
}

pub fn plan_transform(
    context: &ProcessingContext,
    has_direct_identifiers: bool,
    anonymity_claimed: bool,
) -> TransformPlan {
    let mut trace = DecisionTrace::new();
    let mut measures = vec![measure::MINIMISE_FIELDS.to_owned()];
    let mut warnings = Vec::new();
    trace.fire(RuleId::TransformMinimisation, &true, "allowlist with justification per field");

    trace.fire(
        RuleId::TransformIdentifiers,
        &has_direct_identifiers,
        if has_direct_identifiers {
            "remove usernames, hash ids, scrub mentions, coarsen timestamps"
        } else {
            "no direct identifiers declared"
        },
    );
    if has_direct_identifiers {
        measures.extend(
            [
                measure::DROP_USERNAMES,
                measure::HASH_IDS,
                measure::SCRUB_MENTIONS,
                measure::GENERALISE_TIMESTAMPS,
            ]
            .map(String::from),
        );
    }
    trace.fire(
        RuleId::TransformSpecialCategory,
        &context.special_category_possible,
        if context.special_category_possible {
            "special category data: Art. 89(1) safeguards and restricted access"
        } else {
            "no special category data expected"
        },
    );
    if context.special_category_possible {
        measures.push(measure::ACCESS_RESTRICTED_SENSITIVE.into());
    }
    measures.push(measure::KANON_AUDIT.into());

    trace.fire(
        RuleId::TransformAnonymityClaim,
        &anonymity_claimed,
        "output labelled pseudonymised; still personal data",
    );
    if anonymity_claimed {
        warnings.push(
            "anonymity claim rejected: linkage with public content remains reasonably likely".into(),
        );
    }

    TransformPlan {
        measures,
        output_label: OutputLabel::Pseudonymised,
        warnings,
        trace,
    }
}
