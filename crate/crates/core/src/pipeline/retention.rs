//! Retention scheduling over dataset manifests.
//!
//! Durations are whole calendar months, so "4.5 years" is 54 months from
//! `loaded_at`. The caller supplies `now`, which keeps multi-year schedules
//! testable on a virtual clock.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Months, Utc};
use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataCategory {
    RawApiResponse,
    ProcessedDataset,
    AggregateOutput,
}

impl DataCategory {
    pub const ALL: [DataCategory; 3] = [
        DataCategory::RawApiResponse,
        DataCategory::ProcessedDataset,
        DataCategory::AggregateOutput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataCategory::RawApiResponse => "raw_api_response",
            DataCategory::ProcessedDataset => "processed_dataset",
            DataCategory::AggregateOutput => "aggregate_output",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionPolicy {
    pub max_months: u32,
    pub alert_lead_months: u32,
}

impl RetentionPolicy {
    pub fn delete_at(&self, loaded_at: DateTime<Utc>) -> Option<DateTime<Utc>> {
        loaded_at.checked_add_months(Months::new(self.max_months))
    }

    pub fn alert_at(&self, loaded_at: DateTime<Utc>) -> Option<DateTime<Utc>> {
        loaded_at.checked_add_months(Months::new(self.max_months - self.alert_lead_months))
    }
}

/// Per-category limits. A category without a policy is never scheduled for
/// deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionSchedule {
    pub policies: BTreeMap<DataCategory, RetentionPolicy>,
}

impl Default for RetentionSchedule {
    fn default() -> Self {
        let mut policies = BTreeMap::new();
        policies.insert(
            DataCategory::RawApiResponse,
            RetentionPolicy {
                max_months: 24,
                alert_lead_months: 6,
            },
        );
        policies.insert(
            DataCategory::ProcessedDataset,
            RetentionPolicy {
                max_months: 60,
                alert_lead_months: 6,
            },
        );
        RetentionSchedule { policies }
    }
}

impl RetentionSchedule {
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (cat, p) in &self.policies {
            if p.max_months == 0 || p.alert_lead_months >= p.max_months {
                return Err(PipelineError::InvalidConfig(format!(
                    "{}: alert lead ({} months) must be shorter than the maximum duration ({} months)",
                    cat.as_str(),
                    p.alert_lead_months,
                    p.max_months
                )));
            }
        }
        Ok(())
    }

    pub fn policy(&self, category: DataCategory) -> Option<&RetentionPolicy> {
        self.policies.get(&category)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub category: DataCategory,
    #[serde(default)]
    pub loaded_at: Option<DateTime<Utc>>,
    pub storage_location: String,
    pub replicas: Vec<String>,
    #[serde(default)]
    pub legal_hold: bool,
    #[serde(default)]
    pub transformation_log: Vec<String>,
}

impl DatasetManifest {
    pub fn new(dataset_id: &str, category: DataCategory, storage_location: &str) -> Self {
        DatasetManifest {
            dataset_id: dataset_id.into(),
            category,
            loaded_at: None,
            storage_location: storage_location.into(),
            replicas: vec![storage_location.into()],
            legal_hold: false,
            transformation_log: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.dataset_id.trim().is_empty() {
            return Err(PipelineError::InvalidManifest("empty dataset_id".into()));
        }
        if !self.replicas.iter().any(|r| r == &self.storage_location) {
            return Err(PipelineError::InvalidManifest(format!(
                "{}: replicas must include the primary location {}",
                self.dataset_id, self.storage_location
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionEventKind {
    Alert,
    Delete,
    HoldSkip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionEvent {
    pub kind: RetentionEventKind,
    pub dataset_id: String,
    pub due_at: DateTime<Utc>,
}

/// Events already emitted, so each fires at most once per dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionState {
    emitted: BTreeSet<(String, RetentionEventKind)>,
}

impl RetentionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has(&self, dataset_id: &str, kind: RetentionEventKind) -> bool {
        self.emitted.contains(&(dataset_id.to_string(), kind))
    }
}

/// Evaluate every manifest at `now`. Alerts precede deletes for the same
/// dataset; a held dataset gets one `hold_skip` instead of a delete and is
/// deleted on a later tick once the hold is lifted.
pub fn retention_tick(
    schedule: &RetentionSchedule,
    manifests: &[DatasetManifest],
    now: DateTime<Utc>,
    state: &mut RetentionState,
) -> Result<Vec<RetentionEvent>, PipelineError> {
    schedule.validate()?;
    let mut events = Vec::new();
    for m in manifests {
        m.validate()?;
        let (Some(loaded_at), Some(policy)) = (m.loaded_at, schedule.policy(m.category)) else {
            continue;
        };
        let (Some(alert_at), Some(delete_at)) = (policy.alert_at(loaded_at), policy.delete_at(loaded_at)) else {
            continue;
        };
        let mut emit = |kind, due_at| {
            if state.emitted.insert((m.dataset_id.clone(), kind)) {
                events.push(RetentionEvent {
                    kind,
                    dataset_id: m.dataset_id.clone(),
                    due_at,
                });
            }
        };
        if now >= alert_at {
            emit(RetentionEventKind::Alert, alert_at);
        }
        if now >= delete_at {
            if m.legal_hold {
                emit(RetentionEventKind::HoldSkip, delete_at);
            } else {
                emit(RetentionEventKind::Delete, delete_at);
            }
        }
    }
    tracing::debug!(count = events.len(), %now, "retention tick");
    Ok(events)
}
