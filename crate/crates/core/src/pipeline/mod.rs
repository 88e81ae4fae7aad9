//! Stage orchestration, rate limiting, retention and the golden scenario.

pub mod audit;
pub mod case;
pub mod connector;
pub mod deletion;
pub mod golden;
pub mod inputs;
pub mod limiter;
pub mod retention;

use thiserror::Error;

use crate::ledger::{Blocker, LedgerError, StageId};
use crate::optout::OptOutError;
use crate::policy::PolicyError;
use crate::transform::TransformError;

pub use audit::{AuditEntry, AuditLog};
pub use case::{run_stage, CaseDecisions, PipelineCase, PipelineEnv, StageOutcome};
pub use connector::{
    Connector, ConnectorError, FileReplayConnector, NoopConnector, RecordingConnector, StageContext, StageOutput,
};
pub use deletion::{cascade_delete, DeletionReceipt, InMemoryStorage, LocationReceipt, StorageBackend};
pub use golden::{run_golden_case, run_golden_scenario, EndpointDiff, GoldenReport, GoldenScenario};
pub use inputs::{CaseAssessment, CaseInputs, ErrorInfo, Outcome, TransferInput};
pub use limiter::{Clock, Permit, RateLimiterConfig, SlidingWindowLimiter, SystemClock, VirtualClock};
pub use retention::{
    retention_tick, DataCategory, DatasetManifest, RetentionEvent, RetentionEventKind, RetentionPolicy,
    RetentionSchedule, RetentionState,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("decisions are locked once a stage has run; record a change to reopen")]
    DecisionsLocked,
    #[error("{stage} gate blocked: {}", blockers.iter().map(|b| b.message.as_str()).collect::<Vec<_>>().join("; "))]
    GateBlocked { stage: StageId, blockers: Vec<Blocker> },
    #[error("{stage} connector failed: {message}")]
    ConnectorFailure { stage: StageId, message: String },
    #[error("deletion unconfirmed at {}", receipt.unconfirmed().join(", "))]
    PartialDeletion { receipt: Box<DeletionReceipt> },
    #[error("golden scenario mismatch on {} endpoint(s): {}", diff.len(), diff.iter().map(|d| format!("{} expected {} got {}", d.key, d.expected, d.actual.as_deref().unwrap_or("nothing"))).collect::<Vec<_>>().join("; "))]
    GoldenMismatch {
        diff: Vec<EndpointDiff>,
        report: Box<GoldenReport>,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    OptOut(#[from] OptOutError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::InvalidConfig(_) => "invalid_config",
            PipelineError::InvalidManifest(_) => "invalid_manifest",
            PipelineError::DecisionsLocked => "decisions_locked",
            PipelineError::GateBlocked { .. } => "gate_blocked",
            PipelineError::ConnectorFailure { .. } => "connector_failure",
            PipelineError::PartialDeletion { .. } => "partial_deletion",
            PipelineError::GoldenMismatch { .. } => "golden_mismatch",
            PipelineError::Scenario(_) => "invalid_scenario",
            PipelineError::Io(_) => "io",
            PipelineError::Ledger(e) => e.code(),
            PipelineError::Policy(e) => e.code(),
            PipelineError::Transform(e) => e.code(),
            PipelineError::OptOut(e) => e.code(),
        }
    }
}
