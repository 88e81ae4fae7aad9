//! Extraction window planning against a rolling history limit.

use chrono::{DateTime, Months, Utc};
use serde::{Deserialize, Serialize};

use super::OptOutError;

pub const DEFAULT_ROLLING_MONTHS: u32 = 6;

/// Closed interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeRange {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        TimeRange { start, end }
    }

    pub fn contains_range(&self, other: &TimeRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionWindowReport {
    pub requested_range: TimeRange,
    /// `None` when nothing requested is still retrievable.
    pub accessible_range: Option<TimeRange>,
    pub horizon: DateTime<Utc>,
    pub warnings: Vec<String>,
}

pub fn plan_window(
    requested: TimeRange,
    now: DateTime<Utc>,
    rolling_months: u32,
) -> Result<ExtractionWindowReport, OptOutError> {
    if requested.start > requested.end || requested.end > now {
        return Err(OptOutError::InvalidRange(format!(
            "require start <= end <= now, got {} .. {} at {}",
            requested.start, requested.end, now
        )));
    }
    let horizon = now
        .checked_sub_months(Months::new(rolling_months))
        .ok_or_else(|| OptOutError::InvalidRange("horizon out of range".into()))?;
    let start = requested.start.max(horizon);
    let mut warnings = Vec::new();
    let accessible_range = if start <= requested.end {
        Some(TimeRange::new(start, requested.end))
    } else {
        None
    };
    match accessible_range {
        None => warnings.push(format!(
            "requested range ends before the {rolling_months}-month retrieval horizon ({horizon}); nothing is accessible through the API"
        )),
        Some(r) if r.start > requested.start => warnings.push(format!(
            "requested range truncated at the {rolling_months}-month retrieval horizon ({horizon}); earlier content is unavailable"
        )),
        Some(_) => {}
    }
    Ok(ExtractionWindowReport {
        requested_range: requested,
        accessible_range,
        horizon,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
    }

    #[test]
    fn old_range_is_empty() {
        let r = plan_window(
            TimeRange::new(t(2022, 1, 1), Utc.with_ymd_and_hms(2022, 12, 31, 23, 59, 59).unwrap()),
            t(2023, 7, 1),
            6,
        )
        .unwrap();
        assert!(r.accessible_range.is_none());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn recent_range_unchanged() {
        let req = TimeRange::new(t(2023, 3, 1), t(2023, 5, 1));
        let r = plan_window(req, t(2023, 6, 1), 6).unwrap();
        assert_eq!(r.accessible_range, Some(req));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn straddling_range_truncated() {
        let r = plan_window(TimeRange::new(t(2022, 6, 1), t(2023, 2, 1)), t(2023, 6, 15), 6).unwrap();
        assert_eq!(r.accessible_range, Some(TimeRange::new(t(2022, 12, 15), t(2023, 2, 1))));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn invalid_ranges() {
        assert!(plan_window(TimeRange::new(t(2023, 2, 1), t(2023, 1, 1)), t(2023, 6, 1), 6).is_err());
        assert!(plan_window(TimeRange::new(t(2023, 1, 1), t(2023, 7, 1)), t(2023, 6, 1), 6).is_err());
    }
}
