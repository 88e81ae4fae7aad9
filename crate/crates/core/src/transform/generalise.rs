//! Timestamp coarsening to ISO weeks (UTC).

use chrono::{DateTime, Datelike, NaiveDateTime, Utc};

use super::{Record, TransformError, TransformLog};

/// Accepts RFC 3339 (seconds optional), or epoch seconds as a number or
/// numeric string. Instants without an offset are rejected.
pub fn parse_instant(v: &serde_json::Value) -> Option<DateTime<Utc>> {
    match v {
        serde_json::Value::Number(n) => {
            let secs = n.as_f64()?;
            if !secs.is_finite() {
                return None;
            }
            DateTime::from_timestamp(secs.floor() as i64, 0)
        }
        serde_json::Value::String(s) => {
            let s = s.trim();
            if let Ok(d) = DateTime::parse_from_rfc3339(s) {
                return Some(d.with_timezone(&Utc));
            }
            if let Ok(d) = DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M%:z") {
                return Some(d.with_timezone(&Utc));
            }
            if let Some(naive) = s.strip_suffix('Z').or_else(|| s.strip_suffix('z')) {
                if let Ok(d) = NaiveDateTime::parse_from_str(naive, "%Y-%m-%dT%H:%M") {
                    return Some(d.and_utc());
                }
            }
            if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
                return DateTime::from_timestamp(s.parse().ok()?, 0);
            }
            None
        }
        _ => None,
    }
}

pub fn iso_week_label(t: DateTime<Utc>) -> String {
    let w = t.iso_week();
    format!("{}-W{:02}", w.year(), w.week())
}

/// Replace each named timestamp field with its ISO week label. Records
/// lacking a field are left alone.
pub fn generalise_timestamps(
    records: &[Record],
    fields: &[String],
) -> Result<(Vec<Record>, TransformLog), TransformError> {
    let mut log = TransformLog::new("generalise", records.len());
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let mut rec = r.clone();
        for f in fields {
            let Some(v) = r.get(f) else { continue };
            if v.is_null() {
                continue;
            }
            let t = parse_instant(v).ok_or_else(|| TransformError::UnparseableTimestamp {
                field: f.clone(),
                value: v.to_string(),
            })?;
            rec.insert(f.clone(), iso_week_label(t).into());
            log.bump("generalised", 1);
        }
        out.push(rec);
    }
    Ok((out, log))
}
