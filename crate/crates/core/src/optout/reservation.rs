//! Machine-readable TDM reservation status.

use serde::{Deserialize, Serialize};

use super::robots::{is_allowed, RobotsPolicy};
use super::OptOutError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservationBasis {
    RobotsDisallow,
    TosFlag,
    LlmsTxtAdvisory,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservationStatus {
    pub reserved: bool,
    pub basis: ReservationBasis,
    pub detail: String,
}

impl ReservationStatus {
    pub fn none() -> Self {
        ReservationStatus {
            reserved: false,
            basis: ReservationBasis::None,
            detail: String::new(),
        }
    }
}

/// Reserved only when every path in scope is disallowed for `agent`.
pub fn tdm_reservation(
    policy: &RobotsPolicy,
    agent: &str,
    scope_paths: &[String],
) -> Result<ReservationStatus, OptOutError> {
    if scope_paths.is_empty() {
        return Err(OptOutError::EmptyScope);
    }
    let blocked: Vec<&str> = scope_paths
        .iter()
        .filter(|p| !is_allowed(policy, agent, p))
        .map(String::as_str)
        .collect();
    let reserved = blocked.len() == scope_paths.len();
    let detail = if reserved {
        format!("all {} scope path(s) disallowed for {agent}", scope_paths.len())
    } else if blocked.is_empty() {
        format!("no scope path disallowed for {agent}")
    } else {
        format!(
            "{} of {} scope paths disallowed for {agent}: {}",
            blocked.len(),
            scope_paths.len(),
            blocked.join(", ")
        )
    };
    Ok(ReservationStatus {
        reserved,
        basis: if reserved {
            ReservationBasis::RobotsDisallow
        } else {
            ReservationBasis::None
        },
        detail,
    })
}

/// llms.txt is advisory: its presence is noted but never reserves rights.
pub fn detect_llms_txt(present: bool, text: Option<&str>) -> ReservationStatus {
    if !present {
        return ReservationStatus::none();
    }
    let lines = text.map_or(0, |t| t.lines().filter(|l| !l.trim().is_empty()).count());
    ReservationStatus {
        reserved: false,
        basis: ReservationBasis::LlmsTxtAdvisory,
        detail: format!("llms.txt present ({lines} non-empty lines); advisory only"),
    }
}

/// Merge signals. Robots reservation dominates, then an operator-declared
/// ToS reservation, then the llms.txt advisory.
pub fn combine(robots: &ReservationStatus, tos_flag: bool, llms: &ReservationStatus) -> ReservationStatus {
    if robots.reserved {
        return robots.clone();
    }
    if tos_flag {
        return ReservationStatus {
            reserved: true,
            basis: ReservationBasis::TosFlag,
            detail: "operator declares the terms of service a machine-readable reservation".into(),
        };
    }
    if llms.basis == ReservationBasis::LlmsTxtAdvisory {
        return llms.clone();
    }
    robots.clone()
}
