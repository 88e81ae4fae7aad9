//! Dropping, keyed hashing, and inline mention scrubbing.
//!
//! Hashes are HMAC-SHA256 under an injected salt, truncated to 128 bits and
//! hex encoded. The salt is never generated here.

use std::fmt;
use std::path::Path;

use hmac::{Hmac, Mac};
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::{Record, TransformError, TransformLog};

pub const PLACEHOLDER: &str = "[USER]";
/// Reddit user mentions: `u/name` and `/u/name`.
pub const DEFAULT_MENTION_PATTERN: &str = r"/?\bu/[A-Za-z0-9_-]+";
/// Environment variable naming the salt file.
pub const SALT_FILE_ENV: &str = "PETLP_SALT_FILE";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymisationSpec {
    #[serde(default)]
    pub drop_fields: Vec<String>,
    #[serde(default)]
    pub hash_fields: Vec<String>,
    #[serde(default)]
    pub scrub_patterns: Vec<String>,
    /// Where the salt lives (a file path). Informational; the salt itself is
    /// passed separately.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salt_handle: Option<String>,
}

impl PseudonymisationSpec {
    /// Default for Reddit posts.
    pub fn reddit_default() -> Self {
        PseudonymisationSpec {
            drop_fields: vec!["author".into(), "author_fullname".into()],
            hash_fields: vec!["id".into()],
            scrub_patterns: vec![DEFAULT_MENTION_PATTERN.into()],
            salt_handle: None,
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Salt(Vec<u8>);

impl fmt::Debug for Salt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Salt(<{} bytes>)", self.0.len())
    }
}

impl Salt {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, TransformError> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(TransformError::SaltUnavailable("salt is empty".into()));
        }
        Ok(Salt(bytes))
    }

    /// Read a salt file; surrounding whitespace is ignored.
    pub fn from_file(path: &Path) -> Result<Self, TransformError> {
        let bytes = std::fs::read(path)
            .map_err(|e| TransformError::SaltUnavailable(format!("{}: {e}", path.display())))?;
        let trimmed = String::from_utf8_lossy(&bytes).trim().as_bytes().to_vec();
        Salt::new(trimmed)
    }

    /// Salt from the file named by `PETLP_SALT_FILE`, if set.
    pub fn from_env() -> Result<Option<Self>, TransformError> {
        match std::env::var_os(SALT_FILE_ENV) {
            Some(p) => Salt::from_file(Path::new(&p)).map(Some),
            None => Ok(None),
        }
    }

    pub fn digest(&self, value: &str) -> String {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.0).expect("hmac accepts any key length");
        mac.update(value.as_bytes());
        hex::encode(&mac.finalize().into_bytes()[..16])
    }
}

fn scalar_text(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

pub fn pseudonymise(
    records: &[Record],
    spec: &PseudonymisationSpec,
    salt: Option<&Salt>,
) -> Result<(Vec<Record>, TransformLog), TransformError> {
    if !spec.hash_fields.is_empty() && salt.is_none() {
        return Err(TransformError::MissingSalt);
    }
    let patterns = spec
        .scrub_patterns
        .iter()
        .map(|p| {
            Regex::new(p).map_err(|e| TransformError::InvalidPattern {
                pattern: p.clone(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut log = TransformLog::new("pseudonymise", records.len());
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let mut rec = Record::new();
        for (k, v) in r {
            if spec.drop_fields.iter().any(|f| f == k) {
                log.bump("dropped", 1);
                continue;
            }
            if spec.hash_fields.iter().any(|f| f == k) {
                let salt = salt.expect("checked above");
                match scalar_text(v) {
                    Some(text) => {
                        rec.insert(k.clone(), salt.digest(&text).into());
                        log.bump("hashed", 1);
                    }
                    None => {
                        rec.insert(k.clone(), v.clone());
                    }
                }
                continue;
            }
            match v {
                serde_json::Value::String(s) if !patterns.is_empty() => {
                    let mut text = s.clone();
                    for re in &patterns {
                        let n = re.find_iter(&text).count();
                        if n > 0 {
                            log.bump("scrubbed", n);
                            text = re.replace_all(&text, PLACEHOLDER).into_owned();
                        }
                    }
                    rec.insert(k.clone(), text.into());
                }
                _ => {
                    rec.insert(k.clone(), v.clone());
                }
            }
        }
        out.push(rec);
    }
    Ok((out, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rec(v: serde_json::Value) -> Record {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn mention_scrubbed() {
        let spec = PseudonymisationSpec {
            scrub_patterns: vec![DEFAULT_MENTION_PATTERN.into()],
            ..Default::default()
        };
        let (out, log) = pseudonymise(&[rec(json!({"body": "thanks u/alice!"}))], &spec, None).unwrap();
        assert_eq!(out[0]["body"], "thanks [USER]!");
        let (out, _) = pseudonymise(&[rec(json!({"body": "see /u/Bob_1 and u/c-d, not menu/x"}))], &spec, None).unwrap();
        assert_eq!(out[0]["body"], "see [USER] and [USER], not menu/x");
        assert_eq!(log.counts["scrubbed"], 1);
    }

    #[test]
    fn hashing_is_stable_and_keyed() {
        let spec = PseudonymisationSpec {
            hash_fields: vec!["id".into()],
            ..Default::default()
        };
        let s = Salt::new("s").unwrap();
        let recs = vec![rec(json!({"id": "abc123"})), rec(json!({"id": "abc123"})), rec(json!({"id": "abc124"}))];
        let (out, _) = pseudonymise(&recs, &spec, Some(&s)).unwrap();
        assert_eq!(out[0]["id"], out[1]["id"]);
        assert_ne!(out[0]["id"], out[2]["id"]);
        assert_eq!(out[0]["id"].as_str().unwrap().len(), 32);
        let (other, _) = pseudonymise(&recs, &spec, Some(&Salt::new("t").unwrap())).unwrap();
        assert_ne!(out[0]["id"], other[0]["id"]);
    }

    #[test]
    fn missing_salt() {
        let spec = PseudonymisationSpec {
            hash_fields: vec!["id".into()],
            ..Default::default()
        };
        assert_eq!(pseudonymise(&[], &spec, None), Err(TransformError::MissingSalt));
    }

    #[test]
    fn drops_and_bad_patterns() {
        let (out, _) = pseudonymise(
            &[rec(json!({"author": "alice", "x": 1}))],
            &PseudonymisationSpec::reddit_default(),
            Some(&Salt::new("k").unwrap()),
        )
        .unwrap();
        assert!(!out[0].contains_key("author"));
        let bad = PseudonymisationSpec {
            scrub_patterns: vec!["(".into()],
            ..Default::default()
        };
        assert!(matches!(pseudonymise(&[], &bad, None), Err(TransformError::InvalidPattern { .. })));
    }

    #[test]
    fn salt_debug_is_redacted() {
        assert_eq!(format!("{:?}", Salt::new("secret").unwrap()), "Salt(<6 bytes>)");
    }
}
