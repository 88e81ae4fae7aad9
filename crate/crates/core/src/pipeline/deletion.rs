//! Cascade deletion across a dataset's primary location and replicas.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::audit::AuditLog;
use super::retention::DatasetManifest;
use super::PipelineError;

/// A storage location that can be told to delete a dataset. `Ok(true)` means
/// the location confirmed the deletion.
pub trait StorageBackend: Send + Sync {
    fn delete(&self, location: &str, dataset_id: &str) -> Result<bool, String>;
}

/// Backend keeping dataset ids per location; some locations can be marked
/// unreachable.
#[derive(Debug, Default)]
pub struct InMemoryStorage {
    inner: Mutex<MemState>,
}

#[derive(Debug, Default)]
struct MemState {
    stored: BTreeMap<String, BTreeSet<String>>,
    unreachable: BTreeSet<String>,
}

impl InMemoryStorage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&self, location: &str, dataset_id: &str) {
        let mut s = self.inner.lock().expect("storage lock");
        s.stored.entry(location.into()).or_default().insert(dataset_id.into());
    }

    pub fn set_unreachable(&self, location: &str, unreachable: bool) {
        let mut s = self.inner.lock().expect("storage lock");
        if unreachable {
            s.unreachable.insert(location.into());
        } else {
            s.unreachable.remove(location);
        }
    }

    pub fn contains(&self, location: &str, dataset_id: &str) -> bool {
        let s = self.inner.lock().expect("storage lock");
        s.stored.get(location).is_some_and(|d| d.contains(dataset_id))
    }
}

impl StorageBackend for InMemoryStorage {
    fn delete(&self, location: &str, dataset_id: &str) -> Result<bool, String> {
        let mut s = self.inner.lock().expect("storage lock");
        if s.unreachable.contains(location) {
            return Err(format!("{location} unreachable"));
        }
        if let Some(d) = s.stored.get_mut(location) {
            d.remove(dataset_id);
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationReceipt {
    pub location: String,
    pub primary: bool,
    pub confirmed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionReceipt {
    pub dataset_id: String,
    pub issued_at: DateTime<Utc>,
    pub locations: Vec<LocationReceipt>,
}

impl DeletionReceipt {
    pub fn complete(&self) -> bool {
        self.locations.iter().all(|l| l.confirmed)
    }

    pub fn unconfirmed(&self) -> Vec<&str> {
        self.locations
            .iter()
            .filter(|l| !l.confirmed)
            .map(|l| l.location.as_str())
            .collect()
    }
}

/// Send a delete to the primary and every replica, then append the receipt to
/// the audit log. Any unconfirmed location makes the result `PartialDeletion`,
/// which still carries the full receipt.
pub fn cascade_delete(
    manifest: &DatasetManifest,
    backend: &dyn StorageBackend,
    audit: &AuditLog,
    now: DateTime<Utc>,
) -> Result<DeletionReceipt, PipelineError> {
    manifest.validate()?;
    let mut targets = vec![manifest.storage_location.clone()];
    for r in &manifest.replicas {
        if !targets.contains(r) {
            targets.push(r.clone());
        }
    }
    let locations: Vec<LocationReceipt> = targets
        .into_iter()
        .map(|loc| {
            let res = backend.delete(&loc, &manifest.dataset_id);
            LocationReceipt {
                primary: loc == manifest.storage_location,
                confirmed: matches!(res, Ok(true)),
                error: match res {
                    Ok(true) => None,
                    Ok(false) => Some("not confirmed".into()),
                    Err(e) => Some(e),
                },
                location: loc,
            }
        })
        .collect();
    let receipt = DeletionReceipt {
        dataset_id: manifest.dataset_id.clone(),
        issued_at: now,
        locations,
    };
    audit.record(
        now,
        "cascade_delete",
        None,
        serde_json::to_value(&receipt).map_err(|e| PipelineError::Io(e.to_string()))?,
    )?;
    if receipt.complete() {
        tracing::info!(dataset = %receipt.dataset_id, "cascade deletion confirmed");
        Ok(receipt)
    } else {
        tracing::warn!(dataset = %receipt.dataset_id, missing = ?receipt.unconfirmed(), "partial deletion");
        Err(PipelineError::PartialDeletion {
            receipt: Box::new(receipt),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::retention::DataCategory;

    fn now() -> DateTime<Utc> {
        DateTime::parse_from_rfc3339("2029-01-01T00:00:00Z").unwrap().to_utc()
    }

    fn setup(replicas: &[&str]) -> (DatasetManifest, InMemoryStorage) {
        let mut m = DatasetManifest::new("ds1", DataCategory::ProcessedDataset, "primary");
        let store = InMemoryStorage::new();
        store.put("primary", "ds1");
        for r in replicas {
            m.replicas.push(r.to_string());
            store.put(r, "ds1");
        }
        (m, store)
    }

    #[test]
    fn all_confirm() {
        let (m, store) = setup(&["backup-a", "backup-b"]);
        let audit = AuditLog::in_memory();
        let r = cascade_delete(&m, &store, &audit, now()).unwrap();
        assert_eq!(r.locations.len(), 3);
        assert!(r.complete());
        assert!(!store.contains("backup-b", "ds1"));
        assert_eq!(audit.entries().unwrap().len(), 1);
    }

    #[test]
    fn one_unreachable() {
        let (m, store) = setup(&["backup-a", "backup-b"]);
        store.set_unreachable("backup-b", true);
        let audit = AuditLog::in_memory();
        match cascade_delete(&m, &store, &audit, now()) {
            Err(PipelineError::PartialDeletion { receipt }) => {
                assert_eq!(receipt.unconfirmed(), vec!["backup-b"]);
                assert!(!store.contains("backup-a", "ds1"));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(audit.entries().unwrap().len(), 1);
    }

    #[test]
    fn primary_only() {
        let (m, store) = setup(&[]);
        let r = cascade_delete(&m, &store, &AuditLog::in_memory(), now()).unwrap();
        assert_eq!(r.locations.len(), 1);
        assert!(r.locations[0].primary);
    }
}
