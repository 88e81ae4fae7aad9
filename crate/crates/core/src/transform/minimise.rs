//! Field allowlisting.

use serde::{Deserialize, Serialize};

use super::{Record, TransformError, TransformLog};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllowedField {
    pub field_name: String,
    pub justification: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimisationPlan {
    pub allowlist: Vec<AllowedField>,
}

impl MinimisationPlan {
    pub fn validate(&self) -> Result<(), TransformError> {
        match self.allowlist.iter().find(|f| f.justification.trim().is_empty()) {
            Some(f) => Err(TransformError::UnjustifiedField(f.field_name.clone())),
            None => Ok(()),
        }
    }

    pub fn allows(&self, field: &str) -> bool {
        self.allowlist.iter().any(|f| f.field_name == field)
    }
}

/// Keep only allowlisted fields. Fields absent from a record stay absent.
pub fn apply_minimisation(
    records: &[Record],
    plan: &MinimisationPlan,
) -> Result<(Vec<Record>, TransformLog), TransformError> {
    plan.validate()?;
    let mut log = TransformLog::new("minimise", records.len());
    let out = records
        .iter()
        .map(|r| {
            let mut kept = Record::new();
            for (k, v) in r {
                if plan.allows(k) {
                    kept.insert(k.clone(), v.clone());
                } else {
                    log.bump(&format!("dropped:{k}"), 1);
                }
            }
            kept
        })
        .collect();
    Ok((out, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn reddit() -> Record {
        json!({"selftext": "hi", "created_utc": 1710856920, "subreddit": "science", "score": 3, "author": "alice"})
            .as_object()
            .unwrap()
            .clone()
    }

    fn plan(fields: &[&str]) -> MinimisationPlan {
        MinimisationPlan {
            allowlist: fields
                .iter()
                .map(|f| AllowedField {
                    field_name: f.to_string(),
                    justification: "needed for analysis".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn author_dropped() {
        let (out, log) =
            apply_minimisation(&[reddit()], &plan(&["selftext", "created_utc", "subreddit", "score"])).unwrap();
        assert!(!out[0].contains_key("author"));
        assert_eq!(out[0].len(), 4);
        assert_eq!(log.counts["dropped:author"], 1);
    }

    #[test]
    fn empty_allowlist_empties_records() {
        let (out, _) = apply_minimisation(&[reddit()], &MinimisationPlan::default()).unwrap();
        assert!(out[0].is_empty());
    }

    #[test]
    fn blank_justification_rejected() {
        let mut p = plan(&["selftext"]);
        p.allowlist[0].justification = " ".into();
        assert_eq!(
            apply_minimisation(&[reddit()], &p),
            Err(TransformError::UnjustifiedField("selftext".into()))
        );
    }

    #[test]
    fn idempotent() {
        let p = plan(&["selftext", "score"]);
        let (once, _) = apply_minimisation(&[reddit()], &p).unwrap();
        let (twice, _) = apply_minimisation(&once, &p).unwrap();
        assert_eq!(once, twice);
    }
}
