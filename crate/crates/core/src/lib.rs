//! Compliance-aware research data pipeline: a citation-traced policy engine,
//! a living DPIA ledger, opt-out scanning, privacy transforms and a stage
//! orchestrator.

pub mod ledger;
pub mod optout;
pub mod pipeline;
pub mod policy;
pub mod questionnaire;
pub mod trace;
pub mod transform;

pub use trace::{DecisionTrace, TraceEntry};
