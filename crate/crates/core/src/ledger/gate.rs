//! Stage gates.

use serde::{Deserialize, Serialize};

use super::document::{DpiaDocument, StageId, StageStatus};
use crate::policy::{DpiaRequirement, DpiaStatus, LegalBasisDecision, TdmDecision, TdmException};

/// Decisions the extract gate looks at. Other gates ignore them.
#[derive(Debug, Clone, Copy, Default)]
pub struct GateDecisions<'a> {
    pub legal_basis: Option<&'a LegalBasisDecision>,
    pub dpia_requirement: Option<&'a DpiaRequirement>,
    pub tdm: Option<&'a TdmDecision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocker {
    pub code: String,
    pub message: String,
}

impl Blocker {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Blocker {
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateResult {
    pub stage: StageId,
    pub allowed: bool,
    pub blockers: Vec<Blocker>,
    /// Stale stages that do not block this gate, such as the stage itself.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn gate_check(doc: &DpiaDocument, stage: StageId, decisions: &GateDecisions<'_>) -> GateResult {
    let status = doc.stage_status();
    let prerequisites = doc.mode.prerequisites(stage);
    let mut blockers = Vec::new();
    for s in &prerequisites {
        match status[s] {
            StageStatus::Complete => {}
            StageStatus::Missing => blockers.push(Blocker::new("stage_missing", format!("{s} missing"))),
            StageStatus::Stale => blockers.push(Blocker::new(
                "stage_stale",
                format!("{s} stale: revise the DPIA entry after the recorded change"),
            )),
        }
    }
    let warnings = StageId::ALL
        .iter()
        .filter(|s| !prerequisites.contains(s) && status[*s] == StageStatus::Stale)
        .map(|s| format!("{s} is stale"))
        .collect();

    if stage == StageId::Extract {
        if decisions.legal_basis.is_none() {
            blockers.push(Blocker::new("legal_basis_missing", "no legal basis chosen"));
        }
        match decisions.dpia_requirement {
            None => blockers.push(Blocker::new("dpia_screening_missing", "DPIA screening not performed")),
            Some(req) if req.status == DpiaStatus::Required && status[&StageId::PreRegistration] != StageStatus::Complete => {
                blockers.push(Blocker::new(
                    "dpia_required",
                    "DPIA required but no pre-registration DPIA recorded",
                ))
            }
            Some(_) => {}
        }
        match decisions.tdm {
            None => blockers.push(Blocker::new("tdm_missing", "TDM exception not evaluated")),
            Some(t) if t.exception == TdmException::None => {
                blockers.push(Blocker::new("no_lawful_extraction", "no lawful extraction basis"))
            }
            Some(_) => {}
        }
    }

    GateResult {
        stage,
        allowed: blockers.is_empty(),
        blockers,
        warnings,
    }
}
