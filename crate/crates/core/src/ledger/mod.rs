//! Living DPIA ledger: append-only, stage-scoped, replayed for status.

pub mod document;
pub mod gate;
pub mod report;
pub mod store;

use thiserror::Error;

pub use document::{
    replay, validate_case_id, DpiaDocument, EntryBody, LedgerEntry, PipelineMode, StageId, StageStatus,
};
pub use gate::{gate_check, Blocker, GateDecisions, GateResult};
pub use report::{export_report, ReportFormat};
pub use store::LedgerStore;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("{stage}: missing field {field}")]
    MissingField { stage: StageId, field: String },
    #[error("{stage} cannot be recorded until {} complete", join(missing))]
    OutOfOrderStage { stage: StageId, missing: Vec<StageId> },
    #[error("a DPIA already exists for case {0}")]
    AlreadyExists(String),
    #[error("no DPIA for case {0}")]
    NotFound(String),
    #[error("invalid case id {0:?}")]
    InvalidCaseId(String),
    #[error("ledger corrupt: {0}")]
    Corrupt(String),
    #[error("ledger i/o: {0}")]
    Io(String),
}

fn join(stages: &[StageId]) -> String {
    stages.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}

impl LedgerError {
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::MissingField { .. } => "missing_field",
            LedgerError::OutOfOrderStage { .. } => "out_of_order_stage",
            LedgerError::AlreadyExists(_) => "already_exists",
            LedgerError::NotFound(_) => "not_found",
            LedgerError::InvalidCaseId(_) => "invalid_case_id",
            LedgerError::Corrupt(_) => "corrupt_ledger",
            LedgerError::Io(_) => "io_error",
        }
    }
}
