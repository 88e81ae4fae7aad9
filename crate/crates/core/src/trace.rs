//! Audit trail attached to every policy decision.
//!
//! A [`DecisionTrace`] is an ordered list of fired rules. Each entry names a
//! rule from the [rules manifest](crate::policy::rules), carries its legal
//! citation anchor, a short digest of the inputs the rule looked at, and the
//! conclusion it reached. Traces are deterministic: the same inputs always
//! yield the same rule-id sequence and the same digests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::policy::rules::{self, RuleId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub rule_id: String,
    pub citation: String,
    pub inputs_digest: String,
    pub conclusion: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionTrace {
    entries: Vec<TraceEntry>,
}

impl DecisionTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn rule_ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.rule_id.as_str()).collect()
    }

    /// Record that `rule` fired on `inputs` and concluded `conclusion`.
    ///
    /// The citation is looked up in the manifest, so an entry can never carry
    /// an empty citation.
    pub fn fire<I: Serialize + ?Sized>(
        &mut self,
        rule: RuleId,
        inputs: &I,
        conclusion: impl Into<String>,
    ) {
        self.fire_with_citation(rule, rules::citation(rule), inputs, conclusion);
    }

    /// Like [`fire`](Self::fire) but with a caller-supplied citation, used for
    /// data-driven rules (platform rule packs) whose citation lives in the pack.
    pub fn fire_with_citation<I: Serialize + ?Sized>(
        &mut self,
        rule: RuleId,
        citation: &str,
        inputs: &I,
        conclusion: impl Into<String>,
    ) {
        let citation = if citation.trim().is_empty() {
            rules::citation(rule)
        } else {
            citation
        };
        self.entries.push(TraceEntry {
            rule_id: rule.as_str().to_owned(),
            citation: citation.to_owned(),
            inputs_digest: digest(inputs),
            conclusion: conclusion.into(),
        });
    }

    /// Append another trace, e.g. a sub-decision that fed this one.
    pub fn extend(&mut self, other: &DecisionTrace) {
        self.entries.extend(other.entries.iter().cloned());
    }
}

/// Short stable digest of the canonical JSON form of `inputs`.
pub fn digest<I: Serialize + ?Sized>(inputs: &I) -> String {
    // serde_json maps are ordered, so the encoding is canonical for our types.
    let bytes = serde_json::to_vec(inputs).unwrap_or_default();
    let hash = Sha256::digest(&bytes);
    hex::encode(&hash[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(&(1, "a")), digest(&(1, "a")));
        assert_ne!(digest(&(1, "a")), digest(&(2, "a")));
        assert_eq!(digest(&()).len(), 16);
    }

    #[test]
    fn blank_citation_falls_back_to_manifest() {
        let mut trace = DecisionTrace::new();
        trace.fire_with_citation(RuleId::DistributionRulePack, "  ", &(), "x");
        assert!(!trace.entries()[0].citation.trim().is_empty());
    }
}
