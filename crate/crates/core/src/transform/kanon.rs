//! k-anonymity audit over exact-match equivalence classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Record, TransformError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatingClass {
    pub values: Vec<serde_json::Value>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KAnonymityReport {
    pub quasi_identifiers: Vec<String>,
    pub threshold: usize,
    pub k_min: usize,
    pub class_count: usize,
    /// Classes smaller than `threshold`, ordered by size then values.
    pub violating_classes: Vec<ViolatingClass>,
}

impl KAnonymityReport {
    pub fn satisfies(&self) -> bool {
        self.violating_classes.is_empty()
    }
}

pub fn k_anonymity(
    records: &[Record],
    quasi_identifiers: &[String],
    threshold: usize,
) -> Result<KAnonymityReport, TransformError> {
    if quasi_identifiers.is_empty() {
        return Err(TransformError::EmptyQuasiIdentifiers);
    }
    // Keyed by canonical JSON so values of different types never collide.
    let mut classes: BTreeMap<Vec<String>, (Vec<serde_json::Value>, usize)> = BTreeMap::new();
    for r in records {
        let mut key = Vec::with_capacity(quasi_identifiers.len());
        let mut values = Vec::with_capacity(quasi_identifiers.len());
        for q in quasi_identifiers {
            let v = r.get(q).ok_or_else(|| TransformError::UnknownField(q.clone()))?;
            key.push(v.to_string());
            values.push(v.clone());
        }
        classes.entry(key).or_insert((values, 0)).1 += 1;
    }
    let k_min = classes.values().map(|(_, n)| *n).min().unwrap_or(0);
    let mut violating: Vec<(Vec<String>, ViolatingClass)> = classes
        .iter()
        .filter(|(_, (_, n))| *n < threshold)
        .map(|(k, (values, n))| {
            (
                k.clone(),
                ViolatingClass {
                    values: values.clone(),
                    size: *n,
                },
            )
        })
        .collect();
    violating.sort_by(|a, b| a.1.size.cmp(&b.1.size).then(a.0.cmp(&b.0)));
    Ok(KAnonymityReport {
        quasi_identifiers: quasi_identifiers.to_vec(),
        threshold,
        k_min,
        class_count: classes.len(),
        violating_classes: violating.into_iter().map(|(_, c)| c).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rows(v: serde_json::Value) -> Vec<Record> {
        v.as_array().unwrap().iter().map(|r| r.as_object().unwrap().clone()).collect()
    }

    #[test]
    fn identical_rows() {
        let r = rows(json!([{"a": 1}, {"a": 1}, {"a": 1}, {"a": 1}]));
        let rep = k_anonymity(&r, &["a".into()], 2).unwrap();
        assert_eq!(rep.k_min, 4);
        assert_eq!(rep.class_count, 1);
        assert!(rep.satisfies());
    }

    #[test]
    fn empty_dataset() {
        let rep = k_anonymity(&[], &["a".into()], 2).unwrap();
        assert_eq!(rep.k_min, 0);
        assert_eq!(rep.class_count, 0);
    }

    #[test]
    fn types_do_not_collide() {
        let r = rows(json!([{"a": 1}, {"a": "1"}]));
        let rep = k_anonymity(&r, &["a".into()], 2).unwrap();
        assert_eq!(rep.class_count, 2);
        assert_eq!(rep.violating_classes.len(), 2);
    }

    #[test]
    fn errors() {
        let r = rows(json!([{"a": 1}]));
        assert_eq!(k_anonymity(&r, &[], 2), Err(TransformError::EmptyQuasiIdentifiers));
        assert_eq!(
            k_anonymity(&r, &["b".into()], 2),
            Err(TransformError::UnknownField("b".into()))
        );
    }
}
