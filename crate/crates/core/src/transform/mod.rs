//! Privacy-preserving transforms over JSON records.

pub mod dp;
pub mod generalise;
pub mod kanon;
pub mod leak;
pub mod minimise;
pub mod pseudonymise;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dp::{dp_release, laplace_noise, DpMechanism, DpReleaseSpec};
pub use generalise::{generalise_timestamps, iso_week_label, parse_instant};
pub use kanon::{k_anonymity, KAnonymityReport, ViolatingClass};
pub use leak::{normalise_words, scan_verbatim_leak, CorpusDoc, LeakMatch, LeakScanReport, DEFAULT_THRESHOLD_WORDS};
pub use minimise::{apply_minimisation, AllowedField, MinimisationPlan};
pub use pseudonymise::{pseudonymise, PseudonymisationSpec, Salt, DEFAULT_MENTION_PATTERN, PLACEHOLDER, SALT_FILE_ENV};

/// One flat record as exchanged in line-delimited JSON.
pub type Record = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("field {0} is allowlisted without a justification")]
    UnjustifiedField(String),
    #[error("hash fields declared but no salt supplied")]
    MissingSalt,
    #[error("salt unavailable: {0}")]
    SaltUnavailable(String),
    #[error("invalid scrub pattern {pattern:?}: {message}")]
    InvalidPattern { pattern: String, message: String },
    #[error("unparseable timestamp in {field}: {value}")]
    UnparseableTimestamp { field: String, value: String },
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("at least one quasi-identifier is required")]
    EmptyQuasiIdentifiers,
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),
    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
}

impl TransformError {
    pub fn code(&self) -> &'static str {
        match self {
            TransformError::UnjustifiedField(_) => "unjustified_field",
            TransformError::MissingSalt => "missing_salt",
            TransformError::SaltUnavailable(_) => "salt_unavailable",
            TransformError::InvalidPattern { .. } => "invalid_pattern",
            TransformError::UnparseableTimestamp { .. } => "unparseable_timestamp",
            TransformError::UnknownField(_) => "unknown_field",
            TransformError::EmptyQuasiIdentifiers => "empty_quasi_identifiers",
            TransformError::InvalidBudget(_) => "invalid_budget",
            TransformError::InvalidRecord { .. } => "invalid_record",
        }
    }
}

/// Summary of one transformation over a batch, for the case audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformLog {
    pub operation: String,
    pub records: usize,
    /// Operation-specific counters, e.g. fields removed or mentions scrubbed.
    pub counts: BTreeMap<String, usize>,
}

impl TransformLog {
    pub(crate) fn new(operation: &str, records: usize) -> Self {
        TransformLog {
            operation: operation.to_owned(),
            records,
            counts: BTreeMap::new(),
        }
    }

    pub(crate) fn bump(&mut self, key: &str, by: usize) {
        *self.counts.entry(key.to_owned()).or_default() += by;
    }
}

pub fn read_jsonl(text: &str) -> Result<Vec<Record>, TransformError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<Record>(l).map_err(|e| TransformError::InvalidRecord {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_jsonl(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialise"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let text = "{\"a\":1}\n\n{\"b\":\"x\"}\n";
        let recs = read_jsonl(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(write_jsonl(&recs), "{\"a\":1}\n{\"b\":\"x\"}\n");
        assert!(matches!(
            read_jsonl("{\"a\":1}\n[1]\n"),
            Err(TransformError::InvalidRecord { line: 2, .. })
        ));
    }
}
