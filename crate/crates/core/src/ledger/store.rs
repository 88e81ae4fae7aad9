//! Line-delimited JSON persistence, one append-only file per case.
//!
//! File `<case_id>.dpia.jsonl`: the first line is a header
//! `{"format":1,"case_id":..,"mode":..}`, every further line one
//! [`LedgerEntry`]. Lines are only ever appended.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::document::{validate_case_id, DpiaDocument, LedgerEntry, PipelineMode, StageId};
use super::LedgerError;

const FORMAT: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: u32,
    case_id: String,
    mode: PipelineMode,
}

enum Backend {
    Dir(PathBuf),
    Memory(HashMap<String, Vec<String>>),
}

/// Ledger store. Writes are serialised through one lock, so each case has a
/// single writer; readers get owned snapshots.
pub struct LedgerStore {
    backend: Mutex<Backend>,
}

impl LedgerStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| LedgerError::Io(format!("{}: {e}", dir.display())))?;
        Ok(LedgerStore {
            backend: Mutex::new(Backend::Dir(dir)),
        })
    }

    pub fn in_memory() -> Self {
        LedgerStore {
            backend: Mutex::new(Backend::Memory(HashMap::new())),
        }
    }

    pub fn path_for(dir: &Path, case_id: &str) -> PathBuf {
        dir.join(format!("{case_id}.dpia.jsonl"))
    }

    fn read_lines(backend: &Backend, case_id: &str) -> Result<Option<Vec<String>>, LedgerError> {
        match backend {
            Backend::Memory(m) => Ok(m.get(case_id).cloned()),
            Backend::Dir(dir) => {
                let path = Self::path_for(dir, case_id);
                match fs::read_to_string(&path) {
                    Ok(text) => Ok(Some(
                        text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect(),
                    )),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                    Err(e) => Err(LedgerError::Io(format!("{}: {e}", path.display()))),
                }
            }
        }
    }

    fn append_lines(backend: &mut Backend, case_id: &str, lines: &[String], create: bool) -> Result<(), LedgerError> {
        match backend {
            Backend::Memory(m) => {
                m.entry(case_id.to_owned()).or_default().extend(lines.iter().cloned());
                Ok(())
            }
            Backend::Dir(dir) => {
                let path = Self::path_for(dir, case_id);
                let mut opts = OpenOptions::new();
                if create {
                    opts.write(true).create_new(true);
                } else {
                    opts.append(true);
                }
                let mut f = opts.open(&path).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::AlreadyExists {
                        LedgerError::AlreadyExists(case_id.to_owned())
                    } else {
                        LedgerError::Io(format!("{}: {e}", path.display()))
                    }
                })?;
                let mut buf = String::new();
                for l in lines {
                    buf.push_str(l);
                    buf.push('\n');
                }
                f.write_all(buf.as_bytes())
                    .and_then(|_| f.sync_data())
                    .map_err(|e| LedgerError::Io(format!("{}: {e}", path.display())))
            }
        }
    }

    fn parse(case_id: &str, lines: &[String]) -> Result<DpiaDocument, LedgerError> {
        let (first, rest) = lines
            .split_first()
            .ok_or_else(|| LedgerError::Corrupt(format!("{case_id}: empty ledger file")))?;
        let header: Header =
            serde_json::from_str(first).map_err(|e| LedgerError::Corrupt(format!("header: {e}")))?;
        if header.format != FORMAT {
            return Err(LedgerError::Corrupt(format!("unsupported format {}", header.format)));
        }
        let entries = rest
            .iter()
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str::<LedgerEntry>(l)
                    .map_err(|e| LedgerError::Corrupt(format!("line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        DpiaDocument::from_entries(header.case_id, header.mode, entries)
    }

    pub fn exists(&self, case_id: &str) -> Result<bool, LedgerError> {
        let b = self.backend.lock().expect("ledger lock");
        Ok(Self::read_lines(&b, case_id)?.is_some())
    }

    pub fn load(&self, case_id: &str) -> Result<DpiaDocument, LedgerError> {
        validate_case_id(case_id)?;
        let b = self.backend.lock().expect("ledger lock");
        let lines = Self::read_lines(&b, case_id)?.ok_or_else(|| LedgerError::NotFound(case_id.to_owned()))?;
        Self::parse(case_id, &lines)
    }

    pub fn init(
        &self,
        case_id: &str,
        mode: PipelineMode,
        pre_registration: BTreeMap<String, String>,
        author: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<DpiaDocument, LedgerError> {
        let doc = DpiaDocument::init(case_id, mode, pre_registration, author, timestamp)?;
        let mut b = self.backend.lock().expect("ledger lock");
        if Self::read_lines(&b, case_id)?.is_some() {
            return Err(LedgerError::AlreadyExists(case_id.to_owned()));
        }
        let header = serde_json::to_string(&Header {
            format: FORMAT,
            case_id: case_id.to_owned(),
            mode,
        })
        .expect("header serialises");
        let entry = serde_json::to_string(&doc.versions()[0]).expect("entry serialises");
        Self::append_lines(&mut b, case_id, &[header, entry], true)?;
        tracing::info!(case_id, "dpia initialised");
        Ok(doc)
    }

    /// Load, apply `f`, and persist whatever entries `f` appended.
    pub fn modify<F>(&self, case_id: &str, f: F) -> Result<DpiaDocument, LedgerError>
    where
        F: FnOnce(&DpiaDocument) -> Result<DpiaDocument, LedgerError>,
    {
        validate_case_id(case_id)?;
        let mut b = self.backend.lock().expect("ledger lock");
        let lines = Self::read_lines(&b, case_id)?.ok_or_else(|| LedgerError::NotFound(case_id.to_owned()))?;
        let doc = Self::parse(case_id, &lines)?;
        let next = f(&doc)?;
        let n = doc.versions().len();
        if next.versions().len() < n || next.versions()[..n] != *doc.versions() {
            return Err(LedgerError::Corrupt("history was rewritten".into()));
        }
        let new: Vec<String> = next.versions()[n..]
            .iter()
            .map(|e| serde_json::to_string(e).expect("entry serialises"))
            .collect();
        Self::append_lines(&mut b, case_id, &new, false)?;
        Ok(next)
    }

    pub fn record_update(
        &self,
        case_id: &str,
        stage: StageId,
        fields: BTreeMap<String, String>,
        citations: Vec<String>,
        author: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<DpiaDocument, LedgerError> {
        self.modify(case_id, |d| d.record_update(stage, fields, citations, author, timestamp))
    }

    pub fn reopen_on_change(
        &self,
        case_id: &str,
        change_description: &str,
        earliest_affected_stage: StageId,
        author: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<DpiaDocument, LedgerError> {
        self.modify(case_id, |d| {
            Ok(d.reopen_on_change(change_description, earliest_affected_stage, author, timestamp))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::document::tests::{fields, ts};
    use crate::ledger::document::StageStatus;

    #[test]
    fn file_round_trip_and_duplicate_init() {
        let dir = tempfile::tempdir().unwrap();
        let store = LedgerStore::open(dir.path()).unwrap();
        store
            .init("case-1", PipelineMode::Elt, fields(StageId::PreRegistration), "r", ts(0))
            .unwrap();
        assert_eq!(
            store.init("case-1", PipelineMode::Elt, fields(StageId::PreRegistration), "r", ts(0)),
            Err(LedgerError::AlreadyExists("case-1".into()))
        );
        store
            .record_update("case-1", StageId::Extract, fields(StageId::Extract), vec![], "r", ts(1))
            .unwrap();
        let d = store.reopen_on_change("case-1", "new source", StageId::Extract, "r", ts(2)).unwrap();
        let loaded = store.load("case-1").unwrap();
        assert_eq!(loaded, d);
        assert_eq!(loaded.mode, PipelineMode::Elt);
        assert_eq!(loaded.status(StageId::Extract), StageStatus::Stale);
        let text = fs::read_to_string(LedgerStore::path_for(dir.path(), "case-1")).unwrap();
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn failed_update_writes_nothing() {
        let store = LedgerStore::in_memory();
        store
            .init("c", PipelineMode::Etl, fields(StageId::PreRegistration), "r", ts(0))
            .unwrap();
        assert!(store
            .record_update("c", StageId::Load, fields(StageId::Load), vec![], "r", ts(1))
            .is_err());
        assert_eq!(store.load("c").unwrap().version(), 1);
        assert!(matches!(store.load("nope"), Err(LedgerError::NotFound(_))));
    }

    #[test]
    fn corrupt_file_detected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.dpia.jsonl"), "{\"format\":1,\"case_id\":\"bad\",\"mode\":\"etl\"}\nnot json\n").unwrap();
        let store = LedgerStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("bad"), Err(LedgerError::Corrupt(_))));
    }
}
