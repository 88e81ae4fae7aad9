//! Stage actions.
//!
//! A connector performs the work of one stage. Calls are synchronous; the
//! runner measures the call and fails it if it overran the connector's
//! timeout. Only a file-replay connector ships; platform clients are out of
//! scope.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::inputs::CaseInputs;
use super::limiter::{Clock, SlidingWindowLimiter};
use super::retention::DatasetManifest;
use crate::ledger::{PipelineMode, StageId};
use crate::transform::{read_jsonl, Record};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ConnectorError(pub String);

/// What a connector sees of the case.
#[derive(Debug, Clone, Copy)]
pub struct StageContext<'a> {
    pub case_id: &'a str,
    pub stage: StageId,
    pub mode: PipelineMode,
    pub inputs: &'a CaseInputs,
    pub now: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    /// Datasets written by the stage.
    #[serde(default)]
    pub manifests: Vec<DatasetManifest>,
    /// Safeguard evidence produced by the stage, such as a passed k-anonymity audit.
    #[serde(default)]
    pub evidence: BTreeSet<String>,
    #[serde(default)]
    pub records: usize,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub trait Connector {
    fn timeout(&self) -> Duration {
        Duration::from_secs(30)
    }

    fn execute(&mut self, ctx: &StageContext<'_>) -> Result<StageOutput, ConnectorError>;
}

/// Does nothing and succeeds.
#[derive(Debug, Default)]
pub struct NoopConnector;

impl Connector for NoopConnector {
    fn execute(&mut self, _ctx: &StageContext<'_>) -> Result<StageOutput, ConnectorError> {
        Ok(StageOutput::default())
    }
}

/// Records every invocation; optionally fails chosen stages.
#[derive(Debug, Default, Clone)]
pub struct RecordingConnector {
    pub calls: Arc<Mutex<Vec<StageId>>>,
    pub fail_on: BTreeSet<StageId>,
}

impl RecordingConnector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> Vec<StageId> {
        self.calls.lock().expect("calls lock").clone()
    }
}

impl Connector for RecordingConnector {
    fn execute(&mut self, ctx: &StageContext<'_>) -> Result<StageOutput, ConnectorError> {
        self.calls.lock().expect("calls lock").push(ctx.stage);
        if self.fail_on.contains(&ctx.stage) {
            return Err(ConnectorError(format!("{} failed", ctx.stage)));
        }
        Ok(StageOutput::default())
    }
}

/// Replays a JSONL dump as the Extract stage, one rate-limited request per page.
pub struct FileReplayConnector {
    path: PathBuf,
    page_size: usize,
    limiter: Arc<SlidingWindowLimiter>,
    clock: Arc<dyn Clock>,
    sleep: Box<dyn FnMut(Duration) + Send>,
    timeout: Duration,
    records: Vec<Record>,
    pub requests: usize,
}

impl FileReplayConnector {
    pub fn new(path: impl Into<PathBuf>, limiter: Arc<SlidingWindowLimiter>, clock: Arc<dyn Clock>) -> Self {
        FileReplayConnector {
            path: path.into(),
            page_size: 100,
            limiter,
            clock,
            sleep: Box::new(std::thread::sleep),
            timeout: Duration::from_secs(30),
            records: Vec::new(),
            requests: 0,
        }
    }

    pub fn with_page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Replace the sleep used while waiting for a permit, e.g. to advance a
    /// virtual clock.
    pub fn with_sleep(mut self, sleep: impl FnMut(Duration) + Send + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }
}

impl Connector for FileReplayConnector {
    fn timeout(&self) -> Duration {
        self.timeout
    }

    fn execute(&mut self, ctx: &StageContext<'_>) -> Result<StageOutput, ConnectorError> {
        if ctx.stage != StageId::Extract {
            return Ok(StageOutput::default());
        }
        let text = std::fs::read_to_string(&self.path)
            .map_err(|e| ConnectorError(format!("{}: {e}", self.path.display())))?;
        let all = read_jsonl(&text).map_err(|e| ConnectorError(e.to_string()))?;
        let mut out = Vec::with_capacity(all.len());
        for page in all.chunks(self.page_size) {
            self.limiter.acquire_with(self.clock.as_ref(), &mut self.sleep);
            self.requests += 1;
            out.extend_from_slice(page);
        }
        self.records = out;
        Ok(StageOutput {
            records: self.records.len(),
            notes: vec![format!("replayed {} records in {} requests", self.records.len(), self.requests)],
            ..StageOutput::default()
        })
    }
}
