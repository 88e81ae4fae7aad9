//! Append-only audit log, one JSON object per line.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub timestamp: DateTime<Utc>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    pub detail: serde_json::Value,
}

#[derive(Debug)]
enum Sink {
    Memory(Vec<AuditEntry>),
    File(PathBuf),
}

#[derive(Debug)]
pub struct AuditLog {
    sink: Mutex<Sink>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        AuditLog {
            sink: Mutex::new(Sink::Memory(Vec::new())),
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        AuditLog {
            sink: Mutex::new(Sink::File(path.into())),
        }
    }

    pub fn append(&self, entry: AuditEntry) -> Result<(), PipelineError> {
        let mut sink = self.sink.lock().expect("audit lock");
        match &mut *sink {
            Sink::Memory(v) => v.push(entry),
            Sink::File(path) => {
                let mut line = serde_json::to_string(&entry).map_err(|e| PipelineError::Io(e.to_string()))?;
                line.push('\n');
                let mut f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&*path)
                    .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
                f.write_all(line.as_bytes()).map_err(|e| PipelineError::Io(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn record(
        &self,
        timestamp: DateTime<Utc>,
        kind: &str,
        case_id: Option<&str>,
        detail: serde_json::Value,
    ) -> Result<(), PipelineError> {
        self.append(AuditEntry {
            timestamp,
            kind: kind.into(),
            case_id: case_id.map(str::to_string),
            detail,
        })
    }

    pub fn entries(&self) -> Result<Vec<AuditEntry>, PipelineError> {
        let sink = self.sink.lock().expect("audit lock");
        match &*sink {
            Sink::Memory(v) => Ok(v.clone()),
            Sink::File(path) => read_audit_file(path),
        }
    }
}

pub fn read_audit_file(path: &Path) -> Result<Vec<AuditEntry>, PipelineError> {
    let f = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(PipelineError::Io(format!("{}: {e}", path.display()))),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| PipelineError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let log = AuditLog::file(dir.path().join("audit.jsonl"));
        let ts = DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z").unwrap().to_utc();
        log.record(ts, "a", Some("c1"), json!({"x": 1})).unwrap();
        log.record(ts, "b", None, json!(null)).unwrap();
        let e = log.entries().unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].case_id.as_deref(), Some("c1"));
        assert_eq!(e[1].kind, "b");
    }
}
