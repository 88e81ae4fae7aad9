//! Event-sourced DPIA document. Status is never stored: it is replayed from
//! the entries every time.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::LedgerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageId {
    PreRegistration,
    Extract,
    Transform,
    Load,
    Present,
}

impl StageId {
    pub const ALL: [StageId; 5] = [
        StageId::PreRegistration,
        StageId::Extract,
        StageId::Transform,
        StageId::Load,
        StageId::Present,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageId::PreRegistration => "pre_registration",
            StageId::Extract => "extract",
            StageId::Transform => "transform",
            StageId::Load => "load",
            StageId::Present => "present",
        }
    }

    pub fn parse(s: &str) -> Option<StageId> {
        StageId::ALL.into_iter().find(|st| st.as_str() == s)
    }

    pub fn title(self) -> &'static str {
        match self {
            StageId::PreRegistration => "Pre-registration",
            StageId::Extract => "Extract",
            StageId::Transform => "Transform",
            StageId::Load => "Load",
            StageId::Present => "Present",
        }
    }

    /// Fields an entry for this stage must carry (non-blank).
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            StageId::PreRegistration => &["hypotheses", "study_design", "data_plan", "model_design", "expected_outputs"],
            StageId::Extract => &["method", "volume", "special_categories", "notification", "technical_measures"],
            StageId::Transform => &[
                "minimisation",
                "anonymisation_attempts",
                "dp_considered",
                "special_safeguards",
                "intermediate_copies",
            ],
            StageId::Load => &["storage_location", "security", "access_controls", "retention", "deletion_protocols"],
            StageId::Present => &["reidentification", "model_privacy", "copyright", "dissemination", "transparency"],
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Missing,
    Complete,
    Stale,
}

impl StageStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StageStatus::Missing => "missing",
            StageStatus::Complete => "complete",
            StageStatus::Stale => "stale",
        }
    }
}

/// Order in which stages run. ELT loads raw data before transforming it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    #[default]
    Etl,
    Elt,
}

impl PipelineMode {
    pub fn order(self) -> [StageId; 5] {
        match self {
            PipelineMode::Etl => StageId::ALL,
            PipelineMode::Elt => [
                StageId::PreRegistration,
                StageId::Extract,
                StageId::Load,
                StageId::Transform,
                StageId::Present,
            ],
        }
    }

    pub fn position(self, stage: StageId) -> usize {
        self.order().iter().position(|s| *s == stage).expect("all stages ordered")
    }

    /// Stages that must be complete before `stage` may run.
    pub fn prerequisites(self, stage: StageId) -> Vec<StageId> {
        let order = self.order();
        order[..self.position(stage)].to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryBody {
    Stage {
        stage: StageId,
        fields: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        citations: Vec<String>,
    },
    Reopen {
        change_description: String,
        earliest_affected_stage: StageId,
        /// Stages this event turned stale, recorded for the audit trail.
        staled: Vec<StageId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub version: u32,
    pub timestamp: DateTime<Utc>,
    pub author: String,
    #[serde(flatten)]
    pub body: EntryBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpiaDocument {
    pub case_id: String,
    pub mode: PipelineMode,
    versions: Vec<LedgerEntry>,
}

/// Replay entries into per-stage status.
pub fn replay(mode: PipelineMode, entries: &[LedgerEntry]) -> BTreeMap<StageId, StageStatus> {
    let mut status: BTreeMap<StageId, StageStatus> =
        StageId::ALL.iter().map(|s| (*s, StageStatus::Missing)).collect();
    for e in entries {
        match &e.body {
            EntryBody::Stage { stage, .. } => {
                status.insert(*stage, StageStatus::Complete);
            }
            EntryBody::Reopen {
                earliest_affected_stage,
                ..
            } => {
                let from = mode.position(*earliest_affected_stage);
                for s in &mode.order()[from..] {
                    if status[s] == StageStatus::Complete {
                        status.insert(*s, StageStatus::Stale);
                    }
                }
            }
        }
    }
    status
}

fn check_fields(stage: StageId, fields: &BTreeMap<String, String>) -> Result<(), LedgerError> {
    for name in stage.required_fields() {
        if fields.get(*name).is_none_or(|v| v.trim().is_empty()) {
            return Err(LedgerError::MissingField {
                stage,
                field: (*name).to_owned(),
            });
        }
    }
    Ok(())
}

pub fn validate_case_id(case_id: &str) -> Result<(), LedgerError> {
    let ok = !case_id.is_empty()
        && case_id.len() <= 128
        && case_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(LedgerError::InvalidCaseId(case_id.to_owned()))
    }
}

impl DpiaDocument {
    /// A document with no entries at all. Every stage is missing.
    pub fn empty(case_id: impl Into<String>, mode: PipelineMode) -> Self {
        DpiaDocument {
            case_id: case_id.into(),
            mode,
            versions: Vec::new(),
        }
    }

    pub fn init(
        case_id: impl Into<String>,
        mode: PipelineMode,
        pre_registration: BTreeMap<String, String>,
        author: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, LedgerError> {
        let case_id = case_id.into();
        validate_case_id(&case_id)?;
        Self::empty(case_id, mode).record_update(
            StageId::PreRegistration,
            pre_registration,
            Vec::new(),
            author,
            timestamp,
        )
    }

    /// Rebuild from stored entries, checking version order.
    pub fn from_entries(
        case_id: impl Into<String>,
        mode: PipelineMode,
        entries: Vec<LedgerEntry>,
    ) -> Result<Self, LedgerError> {
        for (i, e) in entries.iter().enumerate() {
            if e.version != i as u32 + 1 {
                return Err(LedgerError::Corrupt(format!(
                    "entry {} has version {}, expected {}",
                    i,
                    e.version,
                    i + 1
                )));
            }
        }
        Ok(DpiaDocument {
            case_id: case_id.into(),
            mode,
            versions: entries,
        })
    }

    pub fn versions(&self) -> &[LedgerEntry] {
        &self.versions
    }

    pub fn version(&self) -> u32 {
        self.versions.len() as u32
    }

    pub fn stage_status(&self) -> BTreeMap<StageId, StageStatus> {
        replay(self.mode, &self.versions)
    }

    pub fn status(&self, stage: StageId) -> StageStatus {
        self.stage_status()[&stage]
    }

    /// Latest recorded entry for a stage.
    pub fn latest(&self, stage: StageId) -> Option<&LedgerEntry> {
        self.versions
            .iter()
            .rev()
            .find(|e| matches!(&e.body, EntryBody::Stage { stage: s, .. } if *s == stage))
    }

    fn append(&self, timestamp: DateTime<Utc>, author: String, body: EntryBody) -> Self {
        let mut next = self.clone();
        next.versions.push(LedgerEntry {
            version: self.version() + 1,
            timestamp,
            author,
            body,
        });
        next
    }

    pub fn record_update(
        &self,
        stage: StageId,
        fields: BTreeMap<String, String>,
        citations: Vec<String>,
        author: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, LedgerError> {
        check_fields(stage, &fields)?;
        let status = self.stage_status();
        let missing: Vec<StageId> = self
            .mode
            .prerequisites(stage)
            .into_iter()
            .filter(|s| status[s] != StageStatus::Complete)
            .collect();
        if !missing.is_empty() {
            return Err(LedgerError::OutOfOrderStage { stage, missing });
        }
        Ok(self.append(
            timestamp,
            author.into(),
            EntryBody::Stage {
                stage,
                fields,
                citations,
            },
        ))
    }

    /// Mark `earliest_affected_stage` and every later complete stage stale.
    pub fn reopen_on_change(
        &self,
        change_description: impl Into<String>,
        earliest_affected_stage: StageId,
        author: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Self {
        let status = self.stage_status();
        let from = self.mode.position(earliest_affected_stage);
        let staled = self.mode.order()[from..]
            .iter()
            .copied()
            .filter(|s| status[s] == StageStatus::Complete)
            .collect();
        self.append(
            timestamp,
            author.into(),
            EntryBody::Reopen {
                change_description: change_description.into(),
                earliest_affected_stage,
                staled,
            },
        )
    }
}
