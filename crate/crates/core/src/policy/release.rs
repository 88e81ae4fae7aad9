//! Model release gate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::distribution::{check_distribution, safeguard, PlatformRulePack, Verdict};
use super::rules::RuleId;
use super::tdm::TdmDecision;
use super::types::OutputKind;
use super::PolicyError;
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReleaseScope {
    Internal,
    Public,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelReleaseDecision {
    pub scope: ReleaseScope,
    pub verdict: Verdict,
    pub conditions: Vec<String>,
    pub trace: DecisionTrace,
}

pub fn assess_model_release(
    scope: ReleaseScope,
    rule_pack: Option<&PlatformRulePack>,
    tdm: &TdmDecision,
    safeguards: &BTreeSet<String>,
) -> Result<ModelReleaseDecision, PolicyError> {
    let mut trace = DecisionTrace::new();
    trace.fire(RuleId::ModelReleaseScope, &scope, format!("{scope:?} release"));
    let tested = safeguards.contains(safeguard::MODEL_LEAKAGE_TESTED);
    trace.fire(
        RuleId::ModelLeakageTesting,
        &tested,
        if tested {
            "memorisation and extraction tests documented"
        } else {
            "no leakage testing documented"
        },
    );
    let permission = safeguards.contains(safeguard::PLATFORM_PERMISSION);
    trace.fire(
        RuleId::ModelPlatformPermission,
        &permission,
        if permission {
            "platform permission for derivative models on file"
        } else {
            "release contingent on platform permission"
        },
    );

    match scope {
        ReleaseScope::Internal => {
            let mut conditions = vec!["restrict_model_access_to_research_team".to_owned()];
            if !tested {
                conditions.push("test_membership_inference_and_regurgitation".into());
            }
            Ok(ModelReleaseDecision {
                scope,
                verdict: Verdict::AllowedWithConditions,
                conditions,
                trace,
            })
        }
        ReleaseScope::Public => {
            let d = check_distribution(OutputKind::ModelWeights, rule_pack, tdm, safeguards)?;
            trace.extend(&d.trace);
            Ok(ModelReleaseDecision {
                scope,
                verdict: d.verdict,
                conditions: d.conditions,
                trace,
            })
        }
    }
}
