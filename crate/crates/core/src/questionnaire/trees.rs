//! The ten decision trees as data.
//!
//! A node id is a rule id from the manifest, so its question text and
//! citation come from there. Answers set facts on [`CaseInputs`]; each tree's
//! endpoint is the library decision over those facts. Nodes shared between
//! trees carry the same options everywhere and are answered once per case.

use std::collections::BTreeMap;

use serde::Serialize;

use super::QuestionnaireError;
use crate::optout::{combine, detect_llms_txt, ReservationBasis, ReservationStatus};
use crate::pipeline::inputs::{CaseInputs, TransferInput};
use crate::policy::distribution::safeguard;
use crate::policy::{
    EntityKind, ExtractionChannel, LegalBasis, OutputKind, ProfitHandling, Purpose, ReleaseScope, Route, RuleId,
    Tree, Wp29CriteriaSet,
};

type Choices = &'static [(&'static str, &'static str)];

const YES_NO: Choices = &[("yes", "Yes"), ("no", "No")];

/// Options offered at a node.
pub fn node_choices(node: &str) -> Option<Choices> {
    Some(match node {
        "F2.purposes" | "F2.means" | "F2.institution" => YES_NO,
        "F3.entity_kind" => &[
            ("university", "University"),
            ("research_institute", "Research institute"),
            ("public_authority", "Public authority"),
            ("commercial", "Commercial company"),
            ("nonprofit_other", "Other non-profit body"),
        ],
        "F3.official_task" | "F3.special_category" => YES_NO,
        "F3.requested" => &[
            ("none", "No preference"),
            ("consent", "Consent"),
            ("public_task", "Public task"),
            ("legitimate_interest", "Legitimate interests"),
        ],
        "F4.primary_goal" | "F4.public_mission" | "F4.decisive_influence" | "F4.preferential_access" => YES_NO,
        "F4.profit_handling" => &[
            ("not_for_profit", "Not for profit"),
            ("reinvests_profits", "All profits reinvested in research"),
            ("for_profit", "Operates for profit"),
        ],
        "B.evaluation_scoring"
        | "B.automated_decision"
        | "B.systematic_monitoring"
        | "B.sensitive"
        | "B.large_scale"
        | "B.matching_combining"
        | "B.vulnerable_subjects"
        | "B.innovative_use"
        | "B.rights_prevention"
        | "B.profiling_public_social_media" => YES_NO,
        "F5.lawful_access" => YES_NO,
        "F5.purpose" => &[
            ("scientific_research", "Scientific research"),
            ("commercial", "Commercial"),
            ("mixed", "Research with planned commercialisation"),
        ],
        "F5.reservation" => &[
            ("robots_disallow", "robots.txt disallows the research scope"),
            ("tos_flag", "Terms of service declared as a machine-readable reservation"),
            ("llms_txt_only", "Only an llms.txt file"),
            ("none", "No reservation"),
        ],
        "F6.channel" => &[
            ("platform_authorised", "Official platform API"),
            ("user_mediated", "User-mediated collection (data donation)"),
            ("third_party_aggregation", "Third-party aggregator"),
            ("self_directed", "Self-directed scraping"),
        ],
        "F6.public_data" => YES_NO,
        "F7.direct_identifiers" | "F7.anonymity_claim" => YES_NO,
        "F8.destination" => &[
            ("EEA", "Inside the EEA"),
            ("CH", "Switzerland"),
            ("GB", "United Kingdom"),
            ("JP", "Japan"),
            ("KR", "South Korea"),
            ("CA", "Canada"),
            ("US", "United States"),
            ("IN", "India"),
            ("BR", "Brazil"),
            ("CN", "China"),
            ("other", "Another third country"),
        ],
        "F8.adequacy" => &[
            ("yes", "Recipient certified under a recognised framework (e.g. EU-US DPF)"),
            ("no", "No certification"),
        ],
        "F8.safeguards" => &[("yes", "SCCs or BCRs in place"), ("no", "None in place")],
        "F8.derogation" => &[("occasional", "Occasional, non-repetitive"), ("repetitive", "Repetitive or systematic")],
        "F9.release_scope" => &[("internal", "Internal deployment only"), ("public", "Public release")],
        "F9.leakage_testing" | "F9.platform_permission" => YES_NO,
        "F10.output_kind" => &[
            ("paper_with_quotes", "Paper with verbatim quotes"),
            ("aggregate_stats", "Aggregate statistics"),
            ("dataset_ids_only", "Dataset of post identifiers"),
            ("dataset_raw", "Raw dataset"),
            ("model_weights", "Model weights"),
            ("synthetic_dataset", "Synthetic dataset"),
        ],
        "F10.verbatim_quotes" => &[("yes", "Verbatim leak scan passed"), ("no", "Not scanned or failed")],
        "F10.aggregate_privacy" => &[
            ("differential_privacy", "Differential privacy"),
            ("k_anonymity_audit", "k-anonymity audit"),
            ("none", "Neither"),
        ],
        _ => return None,
    })
}

pub(crate) struct TreeDef {
    pub tree: Tree,
    pub title: &'static str,
    /// Nodes in default order; each leads to the next unless a branch says otherwise.
    pub nodes: &'static [&'static str],
    /// (node, choice, next); `None` ends the tree.
    pub branches: &'static [(&'static str, &'static str, Option<&'static str>)],
    /// Trees whose answers this tree's endpoint also needs.
    pub depends_on: &'static [Tree],
}

pub(crate) const TREES: &[TreeDef] = &[
    TreeDef {
        tree: Tree::Controllership,
        title: "Controller relationships",
        nodes: &["F2.purposes", "F2.means", "F2.institution"],
        branches: &[],
        depends_on: &[],
    },
    TreeDef {
        tree: Tree::LegalBasis,
        title: "Legal basis",
        nodes: &["F3.entity_kind", "F3.official_task", "F3.special_category", "F3.requested"],
        branches: &[],
        depends_on: &[],
    },
    TreeDef {
        tree: Tree::ResearchOrganisation,
        title: "Research organisation status",
        nodes: &[
            "F4.primary_goal",
            "F4.profit_handling",
            "F4.public_mission",
            "F4.decisive_influence",
            "F4.preferential_access",
        ],
        branches: &[("F4.decisive_influence", "no", None)],
        depends_on: &[],
    },
    TreeDef {
        tree: Tree::DpiaScreening,
        title: "DPIA screening",
        nodes: &[
            "B.evaluation_scoring",
            "B.automated_decision",
            "B.systematic_monitoring",
            "B.sensitive",
            "B.large_scale",
            "B.matching_combining",
            "B.vulnerable_subjects",
            "B.innovative_use",
            "B.rights_prevention",
            "B.profiling_public_social_media",
        ],
        branches: &[],
        depends_on: &[],
    },
    TreeDef {
        tree: Tree::PlatformTerms,
        title: "Platform terms and TDM exceptions",
        nodes: &["F5.lawful_access", "F5.purpose", "F5.reservation"],
        branches: &[("F5.lawful_access", "no", None)],
        depends_on: &[Tree::ResearchOrganisation],
    },
    TreeDef {
        tree: Tree::Extraction,
        title: "Extraction channel",
        nodes: &["F6.channel", "F6.public_data"],
        branches: &[],
        depends_on: &[Tree::ResearchOrganisation, Tree::PlatformTerms],
    },
    TreeDef {
        tree: Tree::Transform,
        title: "Transformation safeguards",
        nodes: &["F7.direct_identifiers", "F3.special_category", "F7.anonymity_claim"],
        branches: &[],
        depends_on: &[],
    },
    TreeDef {
        tree: Tree::Storage,
        title: "Storage and international transfers",
        nodes: &["F8.destination", "F8.adequacy", "F8.safeguards", "F8.derogation"],
        branches: &[("F8.destination", "EEA", None)],
        depends_on: &[],
    },
    TreeDef {
        tree: Tree::ModelRelease,
        title: "Model release",
        nodes: &["F9.release_scope", "F9.leakage_testing", "F9.platform_permission"],
        branches: &[],
        depends_on: &[Tree::ResearchOrganisation, Tree::PlatformTerms],
    },
    TreeDef {
        tree: Tree::Distribution,
        title: "Distribution of outputs",
        nodes: &[
            "F10.output_kind",
            "F9.platform_permission",
            "F10.verbatim_quotes",
            "F10.aggregate_privacy",
        ],
        branches: &[],
        depends_on: &[Tree::ResearchOrganisation, Tree::PlatformTerms],
    },
];

pub(crate) fn tree_def(tree: Tree) -> &'static TreeDef {
    TREES.iter().find(|t| t.tree == tree).expect("every tree is defined")
}

impl TreeDef {
    pub fn root(&self) -> &'static str {
        self.nodes[0]
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.contains(&node)
    }

    /// Where `choice` at `node` leads.
    pub fn next(&self, node: &str, choice: &str) -> Option<&'static str> {
        if let Some((_, _, next)) = self.branches.iter().find(|(n, c, _)| *n == node && *c == choice) {
            return *next;
        }
        let i = self.nodes.iter().position(|n| *n == node)?;
        self.nodes.get(i + 1).copied()
    }

    /// Follow stored answers from the root. Returns the answered path and
    /// the first unanswered node, if any.
    pub fn walk(&self, answers: &BTreeMap<String, String>) -> (Vec<(&'static str, String)>, Option<&'static str>) {
        let mut path = Vec::new();
        let mut at = Some(self.root());
        while let Some(node) = at {
            match answers.get(node) {
                Some(choice) => {
                    path.push((node, choice.clone()));
                    at = self.next(node, choice);
                }
                None => return (path, Some(node)),
            }
        }
        (path, None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptionView {
    pub choice: String,
    pub label: String,
    /// Next node id; `None` reaches the tree's endpoint.
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeView {
    pub id: String,
    pub question: String,
    pub citation: String,
    pub options: Vec<OptionView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleView {
    pub rule_id: String,
    pub title: String,
    pub citation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeView {
    pub tree: Tree,
    pub title: String,
    pub root: String,
    pub nodes: Vec<NodeView>,
    /// Rules the endpoint evaluation can fire, for rendering traces.
    pub rules: Vec<RuleView>,
    pub depends_on: Vec<Tree>,
}

pub(crate) fn node_view(def: &TreeDef, node: &str) -> NodeView {
    let rule = RuleId::parse(node).expect("tree nodes are manifest rules");
    NodeView {
        id: node.into(),
        question: rule.title().into(),
        citation: rule.citation().into(),
        options: node_choices(node)
            .expect("tree nodes have choices")
            .iter()
            .map(|(c, l)| OptionView {
                choice: (*c).into(),
                label: (*l).into(),
                next: def.next(node, c).map(String::from),
            })
            .collect(),
    }
}

pub fn tree_views() -> Vec<TreeView> {
    TREES
        .iter()
        .map(|def| {
            let mut rules: Vec<RuleView> = RuleId::ALL
                .iter()
                .filter(|r| r.tree() == def.tree)
                .map(|r| RuleView {
                    rule_id: r.as_str().into(),
                    title: r.title().into(),
                    citation: r.citation().into(),
                })
                .collect();
            for n in def.nodes {
                if !rules.iter().any(|r| r.rule_id == *n) {
                    let r = RuleId::parse(n).expect("tree nodes are manifest rules");
                    rules.push(RuleView {
                        rule_id: r.as_str().into(),
                        title: r.title().into(),
                        citation: r.citation().into(),
                    });
                }
            }
            TreeView {
                tree: def.tree,
                title: def.title.into(),
                root: def.root().into(),
                nodes: def.nodes.iter().map(|n| node_view(def, n)).collect(),
                rules,
                depends_on: def.depends_on.to_vec(),
            }
        })
        .collect()
}

pub fn validate_choice(node: &str, choice: &str) -> Result<(), QuestionnaireError> {
    let choices = node_choices(node).ok_or_else(|| QuestionnaireError::UnknownNode {
        tree: None,
        node: node.into(),
    })?;
    if choices.iter().any(|(c, _)| *c == choice) {
        Ok(())
    } else {
        Err(QuestionnaireError::InvalidChoice {
            node: node.into(),
            choice: choice.into(),
        })
    }
}

/// Nodes answered on the current path of some tree. Answers left off every
/// path (after an earlier answer changed direction) are ignored.
pub(crate) fn effective_answers(answers: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for def in TREES {
        for (node, choice) in def.walk(answers).0 {
            out.insert(node.to_string(), choice);
        }
    }
    out
}

fn set_safeguard(inputs: &mut CaseInputs, tag: &str, on: bool) {
    if on {
        inputs.safeguards.insert(tag.into());
    } else {
        inputs.safeguards.remove(tag);
    }
}

const DECLARED_TASK: &str = "declared official research task";

/// Apply every effective answer to `base`.
pub(crate) fn derive_inputs(base: &CaseInputs, answers: &BTreeMap<String, String>) -> CaseInputs {
    let mut inputs = base.clone();
    for (node, choice) in effective_answers(answers) {
        apply(&mut inputs, &node, &choice);
    }
    inputs
}

fn apply(inputs: &mut CaseInputs, node: &str, choice: &str) {
    let yes = choice == "yes";
    let p = &mut inputs.profile;
    match node {
        "F2.purposes" => inputs.controllership.researcher_determines_purposes = yes,
        "F2.means" => inputs.controllership.researcher_determines_means = yes,
        "F2.institution" => inputs.controllership.institution_determines_purposes_or_means = yes,
        "F3.entity_kind" => {
            p.entity_kind = match choice {
                "university" => EntityKind::University,
                "research_institute" => EntityKind::ResearchInstitute,
                "public_authority" => EntityKind::PublicAuthority,
                "commercial" => EntityKind::Commercial,
                _ => EntityKind::NonprofitOther,
            }
        }
        "F3.official_task" => {
            if !yes {
                p.official_task_scope = None;
            } else if p.official_task_scope.as_deref().is_none_or(|s| s.trim().is_empty()) {
                p.official_task_scope = Some(DECLARED_TASK.into());
            }
        }
        "F3.special_category" => inputs.context.special_category_possible = yes,
        "F3.requested" => {
            inputs.requested_basis = match choice {
                "consent" => Some(LegalBasis::Consent),
                "public_task" => Some(LegalBasis::PublicTask),
                "legitimate_interest" => Some(LegalBasis::LegitimateInterest),
                _ => None,
            }
        }
        "F4.primary_goal" => p.primary_goal_research = yes,
        "F4.profit_handling" => {
            p.profit_handling = match choice {
                "not_for_profit" => ProfitHandling::NotForProfit,
                "reinvests_profits" => ProfitHandling::ReinvestsProfits,
                _ => ProfitHandling::ForProfit,
            }
        }
        "F4.public_mission" => p.public_interest_mission = yes,
        "F4.decisive_influence" => {
            p.decisive_commercial_influence = yes;
            if !yes {
                p.preferential_commercial_access = false;
            }
        }
        "F4.preferential_access" => p.preferential_commercial_access = yes,
        n if n.starts_with("B.") => {
            if n == "B.profiling_public_social_media" {
                inputs.context.profiling_of_public_social_media = yes;
                return;
            }
            let w = inputs.wp29.get_or_insert_with(Wp29CriteriaSet::default);
            match n {
                "B.evaluation_scoring" => w.evaluation_scoring = yes,
                "B.automated_decision" => w.automated_decision_significant_effect = yes,
                "B.systematic_monitoring" => w.systematic_monitoring = yes,
                "B.sensitive" => w.sensitive_or_highly_personal = yes,
                "B.large_scale" => w.large_scale = yes,
                "B.matching_combining" => w.matching_combining = yes,
                "B.vulnerable_subjects" => w.vulnerable_subjects = yes,
                "B.innovative_use" => w.innovative_use = yes,
                "B.rights_prevention" => w.rights_or_service_prevention = yes,
                _ => {}
            }
        }
        "F5.lawful_access" => inputs.lawful_access = yes,
        "F5.purpose" => {
            inputs.tdm_purpose = Some(match choice {
                "scientific_research" => Purpose::ScientificResearch,
                "commercial" => Purpose::Commercial,
                _ => Purpose::Mixed,
            })
        }
        "F5.reservation" => {
            let none = ReservationStatus::none();
            inputs.reservation = match choice {
                "robots_disallow" => ReservationStatus {
                    reserved: true,
                    basis: ReservationBasis::RobotsDisallow,
                    detail: "declared: robots.txt disallows every path in the research scope".into(),
                },
                "tos_flag" => combine(&none, true, &none),
                "llms_txt_only" => detect_llms_txt(true, None),
                _ => none,
            }
        }
        "F6.channel" => {
            inputs.channel = match choice {
                "platform_authorised" => ExtractionChannel::PlatformAuthorised,
                "user_mediated" => ExtractionChannel::UserMediated,
                "third_party_aggregation" => ExtractionChannel::ThirdPartyAggregation,
                _ => ExtractionChannel::SelfDirected,
            }
        }
        "F6.public_data" => inputs.context.data_publicly_accessible = yes,
        "F7.direct_identifiers" => inputs.has_direct_identifiers = yes,
        "F7.anonymity_claim" => inputs.anonymity_claimed = yes,
        "F8.destination" => {
            let dest = match choice {
                "EEA" => "EU",
                "other" => "XX",
                c => c,
            };
            let route = Route::new("EU", dest);
            inputs.context.cross_border = vec![route.clone()];
            inputs.transfers = vec![TransferInput::plain(route)];
        }
        "F8.adequacy" => inputs.transfers.iter_mut().for_each(|t| t.recipient_dpf_certified = yes),
        "F8.safeguards" => inputs.transfers.iter_mut().for_each(|t| t.scc_available = yes),
        "F8.derogation" => inputs
            .transfers
            .iter_mut()
            .for_each(|t| t.repetitive = choice == "repetitive"),
        "F9.release_scope" => {
            inputs.model_release_scope = if choice == "internal" {
                ReleaseScope::Internal
            } else {
                ReleaseScope::Public
            }
        }
        "F9.leakage_testing" => set_safeguard(inputs, safeguard::MODEL_LEAKAGE_TESTED, yes),
        "F9.platform_permission" => set_safeguard(inputs, safeguard::PLATFORM_PERMISSION, yes),
        "F10.output_kind" => {
            if let Ok(k) = OutputKind::parse(choice) {
                inputs.context.intended_outputs.insert(k);
            }
        }
        "F10.verbatim_quotes" => set_safeguard(inputs, safeguard::VERBATIM_LEAK_SCAN_PASSED, yes),
        "F10.aggregate_privacy" => {
            set_safeguard(inputs, safeguard::DIFFERENTIAL_PRIVACY, choice == "differential_privacy");
            set_safeguard(inputs, safeguard::K_ANONYMITY_AUDIT, choice == "k_anonymity_audit");
        }
        _ => {}
    }
}
