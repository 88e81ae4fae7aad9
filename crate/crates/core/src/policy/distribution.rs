//! Present-stage distribution checks.
//!
//! A verdict is the meet of the platform's rule-pack verdict and the
//! statutory findings for the output kind. Statutory findings can only
//! tighten a pack verdict, never relax it: lawful creation of a dataset under
//! a TDM exception grants no right to distribute it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use super::tdm::{TdmDecision, TdmException};
use super::types::OutputKind;
use super::PolicyError;
use crate::trace::DecisionTrace;

const BUNDLED_REDDIT_PACK: &str = include_str!("../../data/rule_packs/reddit.json");

/// Declared safeguards that distribution rules look for.
pub mod safeguard {
    pub const PLATFORM_PERMISSION: &str = "platform_permission";
    pub const VERBATIM_LEAK_SCAN_PASSED: &str = "verbatim_leak_scan_passed";
    pub const DIFFERENTIAL_PRIVACY: &str = "differential_privacy";
    pub const K_ANONYMITY_AUDIT: &str = "k_anonymity_audit";
    pub const MODEL_LEAKAGE_TESTED: &str = "model_leakage_tested";
}

/// Ordered from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Blocked,
    AllowedWithConditions,
    Allowed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Blocked => "blocked",
            Verdict::AllowedWithConditions => "allowed_with_conditions",
            Verdict::Allowed => "allowed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackRule {
    pub output_kind: OutputKind,
    #[serde(default)]
    pub conditions: BTreeSet<String>,
    pub verdict: Verdict,
    pub citation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformRulePack {
    pub platform_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub rules: Vec<PackRule>,
}

impl PlatformRulePack {
    pub fn reddit() -> Self {
        load_rule_pack(BUNDLED_REDDIT_PACK).expect("bundled reddit pack is valid")
    }

    pub fn covers(&self, kind: OutputKind) -> bool {
        self.rules.iter().any(|r| r.output_kind == kind)
    }

    /// Most specific rule for `kind` whose conditions are all present in
    /// `safeguards`. Equal specificity resolves to the stricter verdict.
    pub fn select(&self, kind: OutputKind, safeguards: &BTreeSet<String>) -> Option<&PackRule> {
        self.rules
            .iter()
            .filter(|r| r.output_kind == kind && r.conditions.is_subset(safeguards))
            .max_by(|a, b| {
                a.conditions
                    .len()
                    .cmp(&b.conditions.len())
                    .then(b.verdict.cmp(&a.verdict))
                    .then(b.conditions.cmp(&a.conditions))
            })
    }
}

/// Parse and validate a rule pack document (JSON).
pub fn load_rule_pack(document: &str) -> Result<PlatformRulePack, PolicyError> {
    let pack: PlatformRulePack =
        serde_json::from_str(document).map_err(|e| PolicyError::SchemaViolation(e.to_string()))?;
    if pack.platform_id.trim().is_empty() {
        return Err(PolicyError::SchemaViolation("platform_id is empty".into()));
    }
    let mut seen = BTreeSet::new();
    for (i, rule) in pack.rules.iter().enumerate() {
        if rule.citation.trim().is_empty() {
            return Err(PolicyError::SchemaViolation(format!("rules[{i}]: citation is empty")));
        }
        if rule.conditions.iter().any(|c| c.trim().is_empty()) {
            return Err(PolicyError::SchemaViolation(format!("rules[{i}]: blank condition tag")));
        }
        if !seen.insert((rule.output_kind, rule.conditions.clone())) {
            return Err(PolicyError::DuplicateRule {
                output_kind: rule.output_kind,
                conditions: rule.conditions.iter().cloned().collect(),
            });
        }
    }
    Ok(pack)
}

/// Registry of loaded packs keyed by platform.
#[derive(Debug, Clone, Default)]
pub struct RulePackSet {
    packs: BTreeMap<String, PlatformRulePack>,
}

impl RulePackSet {
    pub fn bundled() -> Self {
        let mut set = Self::default();
        set.insert(PlatformRulePack::reddit());
        set
    }

    pub fn insert(&mut self, pack: PlatformRulePack) {
        self.packs.insert(pack.platform_id.clone(), pack);
    }

    pub fn get(&self, platform_id: &str) -> Option<&PlatformRulePack> {
        self.packs.get(platform_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionDecision {
    pub output_kind: OutputKind,
    pub verdict: Verdict,
    /// Requirements attached to the verdict; for a blocked verdict, what
    /// would have to change before release.
    pub conditions: Vec<String>,
    pub trace: DecisionTrace,
}

struct Finding {
    ceiling: Verdict,
    conditions: Vec<&'static str>,
}

fn statutory_finding(
    kind: OutputKind,
    safeguards: &BTreeSet<String>,
    trace: &mut DecisionTrace,
) -> Finding {
    let has = |tag: &str| safeguards.contains(tag);
    match kind {
        OutputKind::DatasetRaw => {
            trace.fire(
                RuleId::DistributionNoRight,
                &kind,
                "no statutory right to redistribute mined copies; release only under platform licence with controlled access",
            );
            Finding {
                ceiling: Verdict::AllowedWithConditions,
                conditions: vec!["platform_licence_for_redistribution", "controlled_access_agreement"],
            }
        }
        OutputKind::DatasetIdsOnly => {
            trace.fire(
                RuleId::DistributionNoRight,
                &kind,
                "identifier-only release: recipients hydrate content under platform policy",
            );
            Finding {
                ceiling: Verdict::AllowedWithConditions,
                conditions: vec!["recipients_hydrate_via_platform_api"],
            }
        }
        OutputKind::PaperWithQuotes => {
            if has(safeguard::VERBATIM_LEAK_SCAN_PASSED) {
                trace.fire(
                    RuleId::DistributionVerbatim,
                    &true,
                    "verbatim leak scan passed; paraphrase identifiable content",
                );
                Finding {
                    ceiling: Verdict::AllowedWithConditions,
                    conditions: vec!["paraphrase_identifiable_quotes"],
                }
            } else {
                trace.fire(
                    RuleId::DistributionVerbatim,
                    &false,
                    "blocked pending verbatim leak scan",
                );
                Finding {
                    ceiling: Verdict::Blocked,
                    conditions: vec!["run_verbatim_leak_scan"],
                }
            }
        }
        OutputKind::AggregateStats => {
            let protected = has(safeguard::DIFFERENTIAL_PRIVACY) || has(safeguard::K_ANONYMITY_AUDIT);
            trace.fire(
                RuleId::DistributionAggregate,
                &protected,
                if protected {
                    "aggregates released with formal disclosure control"
                } else {
                    "aggregates are not anonymous by default; apply disclosure control"
                },
            );
            if protected {
                Finding {
                    ceiling: Verdict::Allowed,
                    conditions: vec![],
                }
            } else {
                Finding {
                    ceiling: Verdict::AllowedWithConditions,
                    conditions: vec!["apply_differential_privacy_or_k_anonymity_audit"],
                }
            }
        }
        OutputKind::ModelWeights => {
            let tested = has(safeguard::MODEL_LEAKAGE_TESTED);
            trace.fire(
                RuleId::DistributionModel,
                &tested,
                if tested {
                    "leakage tests documented; model still treated as personal data"
                } else {
                    "model not tested for memorisation; test before any release"
                },
            );
            Finding {
                ceiling: Verdict::AllowedWithConditions,
                conditions: if tested {
                    vec!["document_leakage_tests"]
                } else {
                    vec!["test_membership_inference_and_regurgitation"]
                },
            }
        }
        OutputKind::SyntheticDataset => {
            trace.fire(
                RuleId::DistributionAggregate,
                &kind,
                "synthetic data must not reproduce training records",
            );
            Finding {
                ceiling: Verdict::AllowedWithConditions,
                conditions: vec!["verify_no_training_records_reproduced"],
            }
        }
    }
}

pub fn check_distribution(
    output_kind: OutputKind,
    rule_pack: Option<&PlatformRulePack>,
    tdm: &TdmDecision,
    safeguards: &BTreeSet<String>,
) -> Result<DistributionDecision, PolicyError> {
    let pack = rule_pack.ok_or_else(|| PolicyError::MissingRulePack {
        platform_id: None,
    })?;
    if !pack.covers(output_kind) {
        return Err(PolicyError::UnknownOutputKind(output_kind.as_str().to_owned()));
    }
    let mut trace = DecisionTrace::new();
    trace.fire(RuleId::DistributionOutputKind, &output_kind, output_kind.as_str());

    let mut conditions: Vec<String> = Vec::new();
    let pack_verdict = match pack.select(output_kind, safeguards) {
        Some(rule) => {
            trace.fire_with_citation(
                RuleId::DistributionRulePack,
                &rule.citation,
                &(output_kind, &rule.conditions),
                format!("{} pack: {}", pack.platform_id, rule.verdict.as_str()),
            );
            rule.verdict
        }
        None => {
            trace.fire(
                RuleId::DistributionRulePack,
                &output_kind,
                format!(
                    "{} pack: no rule matches declared safeguards; default deny",
                    pack.platform_id
                ),
            );
            Verdict::Blocked
        }
    };
    if pack_verdict == Verdict::Blocked {
        // Name the pack conditions that would unlock a more permissive rule.
        for rule in pack.rules.iter().filter(|r| r.output_kind == output_kind) {
            if rule.verdict > Verdict::Blocked {
                conditions.extend(rule.conditions.difference(safeguards).cloned());
            }
        }
    }

    let mut verdict = pack_verdict;
    if tdm.exception == TdmException::None {
        trace.fire(
            RuleId::DistributionNoExtraction,
            &tdm.exception,
            "no TDM exception covered extraction",
        );
        verdict = Verdict::Blocked;
        conditions.push("establish_lawful_extraction_basis".into());
    }

    let finding = statutory_finding(output_kind, safeguards, &mut trace);
    verdict = verdict.min(finding.ceiling);
    conditions.extend(finding.conditions.iter().map(|c| c.to_string()));
    if verdict == Verdict::Allowed {
        conditions.clear();
    }
    let mut seen = BTreeSet::new();
    conditions.retain(|c| seen.insert(c.clone()));

    Ok(DistributionDecision {
        output_kind,
        verdict,
        conditions,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::tdm::RetentionAllowance;

    fn tdm(exception: TdmException) -> TdmDecision {
        TdmDecision {
            exception,
            tos_override: exception == TdmException::Article3,
            retention_allowance: RetentionAllowance::VerificationRetention,
            obligations: vec![],
            trace: DecisionTrace::new(),
        }
    }

    fn tags(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn reddit_pack_has_six_rules_including_training_ban() {
        let pack = PlatformRulePack::reddit();
        assert_eq!(pack.platform_id, "reddit");
        assert_eq!(pack.rules.len(), 6);
        assert!(pack.rules.iter().any(|r| r.output_kind == OutputKind::ModelWeights
            && r.conditions.is_empty()
            && r.verdict == Verdict::Blocked
            && r.citation.contains("model training")));
    }

    #[test]
    fn empty_pack_is_valid() {
        let pack = load_rule_pack(r#"{"platform_id":"x","rules":[]}"#).unwrap();
        assert!(pack.rules.is_empty());
    }

    #[test]
    fn duplicate_rule_rejected() {
        let doc = r#"{"platform_id":"x","rules":[
            {"output_kind":"dataset_raw","conditions":["a","b"],"verdict":"blocked","citation":"c"},
            {"output_kind":"dataset_raw","conditions":["b","a"],"verdict":"allowed","citation":"d"}]}"#;
        assert!(matches!(load_rule_pack(doc), Err(PolicyError::DuplicateRule { .. })));
    }

    #[test]
    fn schema_violations() {
        for doc in [
            r#"{"platform_id":"","rules":[]}"#,
            r#"{"platform_id":"x"}"#,
            r#"{"platform_id":"x","rules":[{"output_kind":"dataset_raw","verdict":"blocked","citation":" "}]}"#,
            r#"{"platform_id":"x","rules":[{"output_kind":"hologram","verdict":"blocked","citation":"c"}]}"#,
            r#"{"platform_id":"x","rules":[],"extra":1}"#,
            "not json",
        ] {
            assert!(
                matches!(load_rule_pack(doc), Err(PolicyError::SchemaViolation(_))),
                "{doc}"
            );
        }
    }

    #[test]
    fn model_weights_without_permission_blocked() {
        let pack = PlatformRulePack::reddit();
        let d = check_distribution(
            OutputKind::ModelWeights,
            Some(&pack),
            &tdm(TdmException::Article3),
            &tags(&[]),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Blocked);
        assert!(d.conditions.iter().any(|c| c == safeguard::PLATFORM_PERMISSION));
    }

    #[test]
    fn model_weights_with_permission_conditional() {
        let pack = PlatformRulePack::reddit();
        let d = check_distribution(
            OutputKind::ModelWeights,
            Some(&pack),
            &tdm(TdmException::Article3),
            &tags(&[safeguard::PLATFORM_PERMISSION]),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::AllowedWithConditions);
    }

    #[test]
    fn ids_only_needs_hydration() {
        let pack = PlatformRulePack::reddit();
        let d = check_distribution(
            OutputKind::DatasetIdsOnly,
            Some(&pack),
            &tdm(TdmException::Article3),
            &tags(&[]),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::AllowedWithConditions);
        assert!(d.conditions.iter().any(|c| c.contains("hydrate")));
    }

    #[test]
    fn quotes_blocked_pending_leak_scan() {
        let pack = PlatformRulePack::reddit();
        let d = check_distribution(
            OutputKind::PaperWithQuotes,
            Some(&pack),
            &tdm(TdmException::Article3),
            &tags(&[]),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Blocked);
        assert!(d.conditions.contains(&"run_verbatim_leak_scan".to_string()));
        let d = check_distribution(
            OutputKind::PaperWithQuotes,
            Some(&pack),
            &tdm(TdmException::Article3),
            &tags(&[safeguard::VERBATIM_LEAK_SCAN_PASSED]),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::AllowedWithConditions);
    }

    #[test]
    fn aggregates_with_dp_allowed() {
        let pack = PlatformRulePack::reddit();
        let d = check_distribution(
            OutputKind::AggregateStats,
            Some(&pack),
            &tdm(TdmException::Article3),
            &tags(&[safeguard::DIFFERENTIAL_PRIVACY]),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Allowed);
        assert!(d.conditions.is_empty());
    }

    #[test]
    fn errors_for_missing_pack_and_uncovered_kind() {
        let pack = PlatformRulePack::reddit();
        let t = tdm(TdmException::Article3);
        assert!(matches!(
            check_distribution(OutputKind::AggregateStats, None, &t, &tags(&[])),
            Err(PolicyError::MissingRulePack { .. })
        ));
        assert!(matches!(
            check_distribution(OutputKind::SyntheticDataset, Some(&pack), &t, &tags(&[])),
            Err(PolicyError::UnknownOutputKind(_))
        ));
    }

    #[test]
    fn article3_never_loosens_raw_dataset_verdict() {
        let all = [
            safeguard::PLATFORM_PERMISSION,
            safeguard::VERBATIM_LEAK_SCAN_PASSED,
            safeguard::DIFFERENTIAL_PRIVACY,
            safeguard::K_ANONYMITY_AUDIT,
            safeguard::MODEL_LEAKAGE_TESTED,
        ];
        let packs = [
            PlatformRulePack::reddit(),
            load_rule_pack(
                r#"{"platform_id":"open","rules":[
                {"output_kind":"dataset_raw","verdict":"allowed","citation":"open licence"}]}"#,
            )
            .unwrap(),
        ];
        for pack in &packs {
            for mask in 0..(1u32 << all.len()) {
                let s: BTreeSet<String> = all
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, t)| t.to_string())
                    .collect();
                let pack_verdict = pack
                    .select(OutputKind::DatasetRaw, &s)
                    .map_or(Verdict::Blocked, |r| r.verdict);
                for ex in [TdmException::Article3, TdmException::Article4, TdmException::None] {
                    let d = check_distribution(OutputKind::DatasetRaw, Some(pack), &tdm(ex), &s).unwrap();
                    assert!(d.verdict <= pack_verdict);
                    assert!(d.verdict < Verdict::Allowed);
                }
            }
        }
    }

    #[test]
    fn no_extraction_basis_blocks_everything() {
        let pack = PlatformRulePack::reddit();
        let d = check_distribution(
            OutputKind::AggregateStats,
            Some(&pack),
            &tdm(TdmException::None),
            &tags(&[safeguard::DIFFERENTIAL_PRIVACY]),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Blocked);
    }
}
