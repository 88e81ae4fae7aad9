//! Case state behind the questionnaire endpoints.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::trees::{self, derive_inputs, effective_answers, node_view, tree_def, validate_choice, NodeView, TREES};
use super::QuestionnaireError;
use crate::ledger::{gate_check, validate_case_id, DpiaDocument, GateDecisions, GateResult, LedgerStore, PipelineMode, StageId, StageStatus};
use crate::pipeline::CaseInputs;
use crate::policy::{
    EntityKind, OutputKind, ProcessingContext, ProfitHandling, Purpose, ResearcherProfile, RulePackSet, SubjectScale,
    TransferConfig, Tree,
};
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateCaseRequest {
    #[serde(default)]
    pub case_id: Option<String>,
    #[serde(default)]
    pub mode: Option<PipelineMode>,
    /// Facts already known; answers override them.
    #[serde(default)]
    pub inputs: Option<CaseInputs>,
    /// When given, the DPIA ledger is initialised with these fields.
    #[serde(default)]
    pub pre_registration: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub author: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub tree: String,
    pub node_id: String,
    pub choice: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub node_id: String,
    pub choice: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpiaUpdateRequest {
    pub stage: StageId,
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub citations: Vec<String>,
    #[serde(default)]
    pub author: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathStep {
    pub node_id: String,
    pub choice: String,
}

/// Where a tree stands.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Endpoint {
    /// These trees still have unanswered nodes.
    Pending { missing: Vec<Tree> },
    Decided {
        verdict: String,
        decision: Value,
        trace: DecisionTrace,
    },
    Error { code: String, message: String },
}

impl Endpoint {
    pub fn verdict(&self) -> Option<&str> {
        match self {
            Endpoint::Decided { verdict, .. } => Some(verdict),
            _ => None,
        }
    }

    pub fn trace(&self) -> Option<&DecisionTrace> {
        match self {
            Endpoint::Decided { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeState {
    pub tree: Tree,
    pub path: Vec<PathStep>,
    /// Next question; `None` once the tree is answered through.
    pub current: Option<NodeView>,
    pub endpoint: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerResponse {
    #[serde(flatten)]
    pub state: TreeState,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseView {
    pub case_id: String,
    pub mode: PipelineMode,
    pub answers: BTreeMap<String, String>,
    /// Facts after applying the answers.
    pub inputs: CaseInputs,
    pub trees: Vec<TreeState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIfTree {
    pub tree: Tree,
    pub actual: Endpoint,
    pub hypothetical: Endpoint,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIfResponse {
    pub node_id: String,
    pub choice: String,
    pub trees: Vec<WhatIfTree>,
    pub changed_any: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpiaView {
    pub case_id: String,
    pub mode: PipelineMode,
    pub initialised: bool,
    pub version: u32,
    pub stage_status: BTreeMap<StageId, StageStatus>,
    /// Gate outcome per stage, against the decisions the answers imply.
    pub gates: Vec<GateResult>,
}

struct CaseRecord {
    mode: PipelineMode,
    base: CaseInputs,
    answers: BTreeMap<String, String>,
}

/// Inputs a case starts from when none are supplied: a not-for-profit
/// university studying public Reddit content for research.
pub fn default_inputs() -> CaseInputs {
    CaseInputs::new(
        ResearcherProfile {
            entity_kind: EntityKind::University,
            primary_goal_research: true,
            profit_handling: ProfitHandling::NotForProfit,
            public_interest_mission: true,
            decisive_commercial_influence: false,
            preferential_commercial_access: false,
            purpose: Purpose::ScientificResearch,
            official_task_scope: None,
            commercialisation_planned: None,
        },
        ProcessingContext {
            platform_id: "reddit".into(),
            data_publicly_accessible: true,
            special_category_possible: false,
            subject_count_scale: SubjectScale::Small,
            vulnerable_subjects: false,
            combines_datasets: false,
            innovative_technology: false,
            profiling_of_public_social_media: false,
            intended_outputs: BTreeSet::new(),
            cross_border: Vec::new(),
        },
    )
}

type Now = Box<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub struct CaseService {
    cases: Mutex<HashMap<String, CaseRecord>>,
    store: LedgerStore,
    packs: RulePackSet,
    lists: TransferConfig,
    next_id: AtomicU64,
    now: Now,
}

impl CaseService {
    pub fn new(store: LedgerStore, packs: RulePackSet, lists: TransferConfig) -> Self {
        CaseService {
            cases: Mutex::new(HashMap::new()),
            store,
            packs,
            lists,
            next_id: AtomicU64::new(1),
            now: Box::new(Utc::now),
        }
    }

    /// In-memory ledger with the bundled rule packs and transfer lists.
    pub fn in_memory() -> Self {
        Self::new(LedgerStore::in_memory(), RulePackSet::bundled(), TransferConfig::bundled())
    }

    pub fn with_clock(mut self, now: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.now = Box::new(now);
        self
    }

    pub fn store(&self) -> &LedgerStore {
        &self.store
    }

    pub fn packs(&self) -> &RulePackSet {
        &self.packs
    }

    pub fn transfer_lists(&self) -> &TransferConfig {
        &self.lists
    }

    pub fn trees(&self) -> Vec<trees::TreeView> {
        trees::tree_views()
    }

    pub fn create_case(&self, req: CreateCaseRequest) -> Result<CaseView, QuestionnaireError> {
        let mut cases = self.cases.lock().expect("case lock");
        let case_id = match req.case_id {
            Some(id) => id,
            None => loop {
                let id = format!("case-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
                if !cases.contains_key(&id) && !self.store.exists(&id)? {
                    break id;
                }
            },
        };
        validate_case_id(&case_id)?;
        if cases.contains_key(&case_id) {
            return Err(QuestionnaireError::CaseExists(case_id));
        }
        let base = req.inputs.unwrap_or_else(default_inputs);
        base.validate()?;
        let mode = req.mode.unwrap_or_default();
        if let Some(fields) = req.pre_registration {
            let author = req.author.as_deref().unwrap_or("questionnaire");
            self.store.init(&case_id, mode, fields, author, (self.now)())?;
        }
        let record = CaseRecord {
            mode,
            base,
            answers: BTreeMap::new(),
        };
        let view = self.view(&case_id, &record);
        cases.insert(case_id.clone(), record);
        tracing::info!(%case_id, "case created");
        Ok(view)
    }

    pub fn get_case(&self, case_id: &str) -> Result<CaseView, QuestionnaireError> {
        let cases = self.cases.lock().expect("case lock");
        let record = cases
            .get(case_id)
            .ok_or_else(|| QuestionnaireError::CaseNotFound(case_id.into()))?;
        Ok(self.view(case_id, record))
    }

    pub fn answer(&self, case_id: &str, req: &AnswerRequest) -> Result<AnswerResponse, QuestionnaireError> {
        let tree = Tree::parse(&req.tree).ok_or_else(|| QuestionnaireError::UnknownTree(req.tree.clone()))?;
        let def = tree_def(tree);
        if !def.contains(&req.node_id) {
            return Err(QuestionnaireError::UnknownNode {
                tree: Some(tree),
                node: req.node_id.clone(),
            });
        }
        validate_choice(&req.node_id, &req.choice)?;

        let mut cases = self.cases.lock().expect("case lock");
        let record = cases
            .get_mut(case_id)
            .ok_or_else(|| QuestionnaireError::CaseNotFound(case_id.into()))?;
        let (path, current) = def.walk(&record.answers);
        let reachable = current == Some(req.node_id.as_str()) || path.iter().any(|(n, _)| *n == req.node_id);
        if !reachable {
            return Err(QuestionnaireError::NodeNotReachable {
                tree,
                node: req.node_id.clone(),
            });
        }

        let before: BTreeSet<String> = effective_answers(&record.answers).into_keys().collect();
        record.answers.insert(req.node_id.clone(), req.choice.clone());
        let after = effective_answers(&record.answers);
        let warnings = before
            .iter()
            .filter(|n| !after.contains_key(*n))
            .map(|n| format!("answer to {n} no longer applies and is ignored"))
            .collect();
        tracing::debug!(%case_id, node = %req.node_id, choice = %req.choice, "answered");
        let inputs = derive_inputs(&record.base, &record.answers);
        Ok(AnswerResponse {
            state: self.tree_state(tree, &record.answers, &inputs),
            warnings,
        })
    }

    /// Endpoints under a hypothetical answer. The case is not modified.
    pub fn whatif(&self, case_id: &str, req: &WhatIfRequest) -> Result<WhatIfResponse, QuestionnaireError> {
        if !TREES.iter().any(|d| d.contains(&req.node_id)) {
            return Err(QuestionnaireError::UnknownNode {
                tree: None,
                node: req.node_id.clone(),
            });
        }
        validate_choice(&req.node_id, &req.choice)?;
        let cases = self.cases.lock().expect("case lock");
        let record = cases
            .get(case_id)
            .ok_or_else(|| QuestionnaireError::CaseNotFound(case_id.into()))?;
        let actual_inputs = derive_inputs(&record.base, &record.answers);
        let mut hypothetical = record.answers.clone();
        hypothetical.insert(req.node_id.clone(), req.choice.clone());
        let hyp_inputs = derive_inputs(&record.base, &hypothetical);
        let trees: Vec<WhatIfTree> = Tree::ALL
            .into_iter()
            .map(|t| {
                let actual = self.endpoint(t, &record.answers, &actual_inputs);
                let hypothetical = self.endpoint(t, &hypothetical, &hyp_inputs);
                WhatIfTree {
                    tree: t,
                    changed: actual != hypothetical,
                    actual,
                    hypothetical,
                }
            })
            .collect();
        Ok(WhatIfResponse {
            node_id: req.node_id.clone(),
            choice: req.choice.clone(),
            changed_any: trees.iter().any(|t| t.changed),
            trees,
        })
    }

    pub fn dpia(&self, case_id: &str) -> Result<DpiaView, QuestionnaireError> {
        let cases = self.cases.lock().expect("case lock");
        let record = cases
            .get(case_id)
            .ok_or_else(|| QuestionnaireError::CaseNotFound(case_id.into()))?;
        self.dpia_view(case_id, record)
    }

    /// Record a stage entry; a pre-registration entry on a case without a
    /// ledger initialises it.
    pub fn record_dpia(&self, case_id: &str, req: DpiaUpdateRequest) -> Result<DpiaView, QuestionnaireError> {
        let cases = self.cases.lock().expect("case lock");
        let record = cases
            .get(case_id)
            .ok_or_else(|| QuestionnaireError::CaseNotFound(case_id.into()))?;
        let author = req.author.as_deref().unwrap_or("questionnaire");
        let now = (self.now)();
        if req.stage == StageId::PreRegistration && !self.store.exists(case_id)? {
            self.store.init(case_id, record.mode, req.fields, author, now)?;
        } else {
            self.store
                .record_update(case_id, req.stage, req.fields, req.citations, author, now)?;
        }
        self.dpia_view(case_id, record)
    }

    fn dpia_view(&self, case_id: &str, record: &CaseRecord) -> Result<DpiaView, QuestionnaireError> {
        let initialised = self.store.exists(case_id)?;
        let doc = if initialised {
            self.store.load(case_id)?
        } else {
            DpiaDocument::empty(case_id, record.mode)
        };
        let inputs = derive_inputs(&record.base, &record.answers);
        let legal_basis = inputs.legal_basis().ok();
        let dpia = inputs.dpia();
        let tdm = inputs.tdm().ok();
        let decisions = GateDecisions {
            legal_basis: legal_basis.as_ref(),
            dpia_requirement: Some(&dpia),
            tdm: tdm.as_ref(),
        };
        Ok(DpiaView {
            case_id: case_id.into(),
            mode: doc.mode,
            initialised,
            version: doc.version(),
            stage_status: doc.stage_status(),
            gates: doc.mode.order().iter().map(|s| gate_check(&doc, *s, &decisions)).collect(),
        })
    }

    fn view(&self, case_id: &str, record: &CaseRecord) -> CaseView {
        let inputs = derive_inputs(&record.base, &record.answers);
        CaseView {
            case_id: case_id.into(),
            mode: record.mode,
            answers: record.answers.clone(),
            trees: Tree::ALL
                .into_iter()
                .map(|t| self.tree_state(t, &record.answers, &inputs))
                .collect(),
            inputs,
        }
    }

    fn tree_state(&self, tree: Tree, answers: &BTreeMap<String, String>, inputs: &CaseInputs) -> TreeState {
        let def = tree_def(tree);
        let (path, current) = def.walk(answers);
        TreeState {
            tree,
            path: path
                .into_iter()
                .map(|(n, c)| PathStep {
                    node_id: n.into(),
                    choice: c,
                })
                .collect(),
            current: current.map(|n| node_view(def, n)),
            endpoint: self.endpoint(tree, answers, inputs),
        }
    }

    fn endpoint(&self, tree: Tree, answers: &BTreeMap<String, String>, inputs: &CaseInputs) -> Endpoint {
        let def = tree_def(tree);
        let missing: Vec<Tree> = std::iter::once(tree)
            .chain(def.depends_on.iter().copied())
            .filter(|t| tree_def(*t).walk(answers).1.is_some())
            .collect();
        if !missing.is_empty() {
            return Endpoint::Pending { missing };
        }
        evaluate(tree, answers, inputs, &self.packs, &self.lists)
    }
}

fn enum_str<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn decided<T: Serialize>(verdict: String, decision: &T, trace: &DecisionTrace) -> Endpoint {
    Endpoint::Decided {
        verdict,
        decision: serde_json::to_value(decision).unwrap_or(Value::Null),
        trace: trace.clone(),
    }
}

fn failed(e: &crate::policy::PolicyError) -> Endpoint {
    Endpoint::Error {
        code: e.code().into(),
        message: e.to_string(),
    }
}

/// The library decision a tree ends in.
pub(crate) fn evaluate(
    tree: Tree,
    answers: &BTreeMap<String, String>,
    inputs: &CaseInputs,
    packs: &RulePackSet,
    lists: &TransferConfig,
) -> Endpoint {
    let none = BTreeSet::new();
    match tree {
        Tree::Controllership => {
            let d = inputs.controllership();
            decided(enum_str(&d.role), &d, &d.trace)
        }
        Tree::LegalBasis => match inputs.legal_basis() {
            Ok(d) => decided(d.basis.as_str().into(), &d, &d.trace),
            Err(e) => failed(&e),
        },
        Tree::ResearchOrganisation => {
            let d = inputs.qualification();
            let v = if d.qualifies { "qualifies" } else { "does_not_qualify" };
            decided(v.into(), &d, &d.trace)
        }
        Tree::DpiaScreening => {
            let d = inputs.dpia();
            decided(enum_str(&d.status), &d, &d.trace)
        }
        Tree::PlatformTerms => match inputs.tdm() {
            Ok(d) => decided(enum_str(&d.exception), &d, &d.trace),
            Err(e) => failed(&e),
        },
        Tree::Extraction => match inputs.extraction() {
            Ok(d) => decided(enum_str(&d.verdict), &d, &d.trace),
            Err(e) => failed(&e),
        },
        Tree::Transform => {
            let d = inputs.transform_plan();
            decided(enum_str(&d.output_label), &d, &d.trace)
        }
        Tree::Storage => {
            let mut decisions = Vec::new();
            for r in inputs.transfer_decisions(lists) {
                match r {
                    Ok(d) => decisions.push(d),
                    Err(e) => return failed(&e),
                }
            }
            let verdict = decisions
                .iter()
                .map(|d| enum_str(&d.mechanism))
                .collect::<Vec<_>>()
                .join(",");
            let mut trace = DecisionTrace::new();
            for d in &decisions {
                trace.extend(&d.trace);
            }
            decided(verdict, &decisions, &trace)
        }
        Tree::ModelRelease => match inputs.model_release(packs, &none) {
            Ok(d) => decided(d.verdict.as_str().into(), &d, &d.trace),
            Err(e) => failed(&e),
        },
        Tree::Distribution => {
            let kind = answers
                .get("F10.output_kind")
                .and_then(|k| OutputKind::parse(k).ok())
                .expect("answered through, so the output kind is set");
            match inputs.distribution(kind, packs, &none) {
                Ok(d) => decided(d.verdict.as_str().into(), &d, &d.trace),
                Err(e) => failed(&e),
            }
        }
    }
}
