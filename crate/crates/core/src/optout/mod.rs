//! Opt-out scanning: crawler-exclusion files, reservation status, and
//! extraction windows.

pub mod reservation;
pub mod robots;
pub mod window;

use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use thiserror::Error;

pub use reservation::{combine, detect_llms_txt, tdm_reservation, ReservationBasis, ReservationStatus};
pub use robots::{
    is_allowed, parse_robots, parse_robots_bytes, parse_robots_with_diagnostics, Diagnostic, RobotsGroup,
    RobotsPolicy, RobotsRule, RuleKind,
};
pub use window::{plan_window, ExtractionWindowReport, TimeRange, DEFAULT_ROLLING_MONTHS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptOutError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("reservation scope is empty")]
    EmptyScope,
    #[error("robots retrieval timed out after {0:?}")]
    FetchTimeout(Duration),
    #[error("robots retrieval failed: {0}")]
    FetchFailed(String),
}

impl OptOutError {
    pub fn code(&self) -> &'static str {
        match self {
            OptOutError::InvalidRange(_) => "invalid_range",
            OptOutError::EmptyScope => "empty_scope",
            OptOutError::FetchTimeout(_) => "fetch_timeout",
            OptOutError::FetchFailed(_) => "fetch_failed",
        }
    }
}

/// Run a caller-supplied retrieval callback under a deadline and parse the
/// result. The callback keeps running in the background if it overruns.
pub fn fetch_policy<F>(fetch: F, timeout: Duration) -> Result<RobotsPolicy, OptOutError>
where
    F: FnOnce() -> Result<Vec<u8>, String> + Send + 'static,
{
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(fetch());
    });
    match rx.recv_timeout(timeout) {
        Ok(Ok(bytes)) => Ok(parse_robots_bytes(&bytes).0),
        Ok(Err(e)) => Err(OptOutError::FetchFailed(e)),
        Err(_) => Err(OptOutError::FetchTimeout(timeout)),
    }
}
