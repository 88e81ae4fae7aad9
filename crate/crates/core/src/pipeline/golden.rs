//! Golden scenario runner.
//!
//! A scenario file bundles case inputs, the platform's opt-out signals, DPIA
//! stage fields, a small record sample and the endpoints the run must reach.
//! The runner takes the case through every decision and every stage in one
//! pass and diffs the endpoints it reached against the expected ones.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use chrono::{DateTime, Months, Utc};
use serde::{Deserialize, Serialize};

use super::audit::AuditLog;
use super::case::{run_stage, PipelineCase, PipelineEnv, StageOutcome};
use super::connector::{Connector, ConnectorError, StageContext, StageOutput};
use super::inputs::{CaseAssessment, CaseInputs, Outcome};
use super::limiter::{RateLimiterConfig, SlidingWindowLimiter, VirtualClock, Clock};
use super::retention::{retention_tick, DataCategory, DatasetManifest, RetentionEvent, RetentionSchedule, RetentionState};
use super::PipelineError;
use crate::ledger::{Blocker, LedgerStore, PipelineMode, StageId, StageStatus};
use crate::optout::{
    combine, detect_llms_txt, parse_robots, plan_window, tdm_reservation, ExtractionWindowReport, TimeRange,
};
use crate::policy::distribution::safeguard;
use crate::policy::{RulePackSet, TransferConfig, Verdict};
use crate::transform::{
    apply_minimisation, generalise_timestamps, k_anonymity, pseudonymise, KAnonymityReport, MinimisationPlan,
    PseudonymisationSpec, Record, Salt, TransformLog,
};

const BUNDLED_SCENARIO: &str = include_str!("../../data/case_study_scenario.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptOutSignals {
    pub robots_txt: String,
    pub agent: String,
    pub scope_paths: Vec<String>,
    #[serde(default)]
    pub tos_flag: bool,
    #[serde(default)]
    pub llms_txt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRequest {
    pub requested: TimeRange,
    pub rolling_months: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSettings {
    pub minimisation: MinimisationPlan,
    pub pseudonymisation: PseudonymisationSpec,
    /// Test salt for the bundled sample only.
    pub salt: String,
    pub timestamp_fields: Vec<String>,
    pub quasi_identifiers: Vec<String>,
    pub k_threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageSettings {
    pub location: String,
    pub replicas: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenScenario {
    pub name: String,
    pub case_id: String,
    pub now: DateTime<Utc>,
    pub mode: PipelineMode,
    pub author: String,
    pub inputs: CaseInputs,
    pub opt_out: OptOutSignals,
    pub window: WindowRequest,
    /// DPIA fields per stage, recorded after each stage runs.
    pub dpia: BTreeMap<StageId, BTreeMap<String, String>>,
    pub records: Vec<Record>,
    pub transform: TransformSettings,
    pub storage: StorageSettings,
    #[serde(default)]
    pub retention: Option<RetentionSchedule>,
    #[serde(default)]
    pub rate_limit: Option<RateLimiterConfig>,
    /// Records per request during extraction.
    #[serde(default = "default_page")]
    pub page_size: usize,
    pub expected: BTreeMap<String, String>,
}

fn default_page() -> usize {
    100
}

impl GoldenScenario {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Scenario(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointDiff {
    pub key: String,
    pub expected: String,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedStage {
    pub stage: StageId,
    pub blockers: Vec<Blocker>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenReport {
    pub scenario: String,
    pub case_id: String,
    pub endpoints: BTreeMap<String, String>,
    pub assessment: CaseAssessment,
    pub window: ExtractionWindowReport,
    pub stages: Vec<StageOutcome>,
    pub blocked: Option<BlockedStage>,
    pub dpia_status: BTreeMap<StageId, StageStatus>,
    pub transform_logs: Vec<TransformLog>,
    pub k_anonymity: Option<KAnonymityReport>,
    pub retention_events: Vec<RetentionEvent>,
    pub diff: Vec<EndpointDiff>,
}

/// Load a scenario file and run it.
pub fn run_golden_case(scenario_file: &Path) -> Result<GoldenReport, PipelineError> {
    let scenario = GoldenScenario::load(scenario_file)?;
    run_golden_scenario(&scenario)
}

/// Stage actions for the scenario: replay, store, transform, aggregate.
struct GoldenConnector<'s> {
    scenario: &'s GoldenScenario,
    salt: Salt,
    limiter: SlidingWindowLimiter,
    clock: VirtualClock,
    raw: Vec<Record>,
    processed: Vec<Record>,
    logs: Vec<TransformLog>,
    kanon: Option<KAnonymityReport>,
    requests: usize,
}

impl GoldenConnector<'_> {
    fn manifest(&self, id: &str, category: DataCategory, now: DateTime<Utc>, log: Vec<String>) -> DatasetManifest {
        let st = &self.scenario.storage;
        let mut m = DatasetManifest::new(id, category, &st.location);
        m.replicas = st.replicas.clone();
        if !m.replicas.contains(&st.location) {
            m.replicas.insert(0, st.location.clone());
        }
        m.loaded_at = Some(now);
        m.transformation_log = log;
        m
    }

    fn transform(&mut self) -> Result<StageOutput, crate::transform::TransformError> {
        let t = &self.scenario.transform;
        let (rows, log) = apply_minimisation(&self.raw, &t.minimisation)?;
        self.logs.push(log);
        let (rows, log) = pseudonymise(&rows, &t.pseudonymisation, Some(&self.salt))?;
        self.logs.push(log);
        let (rows, log) = generalise_timestamps(&rows, &t.timestamp_fields)?;
        self.logs.push(log);
        let report = k_anonymity(&rows, &t.quasi_identifiers, t.k_threshold)?;
        let mut evidence = BTreeSet::new();
        if report.satisfies() && !rows.is_empty() {
            evidence.insert(safeguard::K_ANONYMITY_AUDIT.to_string());
        }
        let notes = vec![format!(
            "k-anonymity over {:?}: k_min {} across {} classes",
            report.quasi_identifiers, report.k_min, report.class_count
        )];
        self.kanon = Some(report);
        self.processed = rows;
        Ok(StageOutput {
            records: self.processed.len(),
            evidence,
            notes,
            ..StageOutput::default()
        })
    }
}

impl Connector for GoldenConnector<'_> {
    fn timeout(&self) -> Duration {
        Duration::from_secs(5)
    }

    fn execute(&mut self, ctx: &StageContext<'_>) -> Result<StageOutput, ConnectorError> {
        match ctx.stage {
            StageId::PreRegistration => Ok(StageOutput::default()),
            StageId::Extract => {
                for page in self.scenario.records.chunks(self.scenario.page_size.max(1)) {
                    let clock = &self.clock;
                    self.limiter.acquire_with(clock, |d| clock.advance(d));
                    self.requests += 1;
                    self.raw.extend_from_slice(page);
                }
                Ok(StageOutput {
                    records: self.raw.len(),
                    notes: vec![format!("{} requests over {:?} virtual time", self.requests, self.clock.now())],
                    ..StageOutput::default()
                })
            }
            StageId::Load => {
                let id = format!("{}-raw", ctx.case_id);
                Ok(StageOutput {
                    manifests: vec![self.manifest(&id, DataCategory::RawApiResponse, ctx.now, vec![])],
                    records: self.raw.len(),
                    ..StageOutput::default()
                })
            }
            StageId::Transform => {
                let mut out = self.transform().map_err(|e| ConnectorError(e.to_string()))?;
                let log = self.logs.iter().map(|l| l.operation.clone()).collect();
                let id = format!("{}-processed", ctx.case_id);
                out.manifests = vec![self.manifest(&id, DataCategory::ProcessedDataset, ctx.now, log)];
                Ok(out)
            }
            StageId::Present => {
                let id = format!("{}-aggregates", ctx.case_id);
                Ok(StageOutput {
                    manifests: vec![self.manifest(&id, DataCategory::AggregateOutput, ctx.now, vec![])],
                    records: self.processed.len(),
                    ..StageOutput::default()
                })
            }
        }
    }
}

fn verdict_str(v: Verdict) -> String {
    v.as_str().to_string()
}

fn outcome_str<T>(o: &Outcome<T>, f: impl Fn(&T) -> String) -> String {
    match o {
        Outcome::Decided(t) => f(t),
        Outcome::Error(e) => format!("error:{}", e.code),
    }
}

fn months_between(from: DateTime<Utc>, to: DateTime<Utc>) -> Option<u32> {
    (0..=1200u32).find(|m| from.checked_add_months(Months::new(*m)) == Some(to))
}

pub fn run_golden_scenario(scenario: &GoldenScenario) -> Result<GoldenReport, PipelineError> {
    let now = scenario.now;
    let mut inputs = scenario.inputs.clone();

    // Opt-out signals feed the TDM reservation.
    let o = &scenario.opt_out;
    let robots = tdm_reservation(&parse_robots(&o.robots_txt), &o.agent, &o.scope_paths)?;
    let llms = detect_llms_txt(o.llms_txt.is_some(), o.llms_txt.as_deref());
    inputs.reservation = combine(&robots, o.tos_flag, &llms);

    let window = plan_window(scenario.window.requested.clone(), now, scenario.window.rolling_months)?;

    let packs = RulePackSet::bundled();
    let lists = TransferConfig::bundled();
    let store = LedgerStore::in_memory();
    let audit = AuditLog::in_memory();
    let env = PipelineEnv {
        store: &store,
        packs: &packs,
        transfer_lists: &lists,
        audit: &audit,
    };

    let mut case = PipelineCase::new(&scenario.case_id, inputs, scenario.mode)?;
    if let Some(r) = &scenario.retention {
        r.validate()?;
        case.retention = r.clone();
    }
    case.decide(&lists)?;

    let pre = scenario.dpia.get(&StageId::PreRegistration).cloned().unwrap_or_default();
    store.init(&case.case_id, scenario.mode, pre, &scenario.author, now)?;

    let limiter_config = scenario.rate_limit.unwrap_or_default();
    let mut connector = GoldenConnector {
        scenario,
        salt: Salt::new(scenario.transform.salt.as_bytes().to_vec())?,
        limiter: SlidingWindowLimiter::new(limiter_config)?,
        clock: VirtualClock::new(),
        raw: Vec::new(),
        processed: Vec::new(),
        logs: Vec::new(),
        kanon: None,
        requests: 0,
    };

    let mut stages = Vec::new();
    let mut blocked = None;
    for (i, stage) in scenario.mode.order().into_iter().enumerate() {
        let at = now + chrono::Duration::minutes(i as i64);
        match run_stage(&mut case, &env, stage, &mut connector, at) {
            Ok(outcome) => {
                if stage != StageId::PreRegistration {
                    let fields = scenario.dpia.get(&stage).cloned().unwrap_or_default();
                    let citations = stage_citations(&case, stage);
                    store.record_update(&case.case_id, stage, fields, citations, &scenario.author, at)?;
                }
                stages.push(outcome);
            }
            Err(PipelineError::GateBlocked { stage, blockers }) => {
                blocked = Some(BlockedStage { stage, blockers });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    // Six virtual years of monthly retention ticks.
    let mut retention_events = Vec::new();
    let mut state = RetentionState::new();
    for m in 0..=72u32 {
        let t = now + Months::new(m) + chrono::Duration::hours(1);
        retention_events.extend(retention_tick(&case.retention, &case.manifests, t, &mut state)?);
    }

    let assessment = case.inputs.assess(&packs, &lists, &case.evidence);
    let doc = store.load(&case.case_id)?;
    let dpia_status = doc.stage_status();

    let mut ep = BTreeMap::new();
    ep.insert(
        "research_organisation.qualifies".into(),
        assessment.qualification.qualifies.to_string(),
    );
    ep.insert(
        "legal_basis.basis".into(),
        outcome_str(&assessment.legal_basis, |b| b.basis.as_str().into()),
    );
    ep.insert(
        "legal_basis.art9_condition".into(),
        outcome_str(&assessment.legal_basis, |b| {
            b.art9_condition
                .map(|c| serde_json::to_value(c).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
                .unwrap_or_else(|| "none".into())
        }),
    );
    ep.insert("dpia.status".into(), enum_str(&assessment.dpia.status));
    ep.insert("dpia.trigger_count".into(), assessment.dpia.trigger_count.to_string());
    let criteria: Vec<&str> = case
        .inputs
        .wp29_criteria()
        .flags()
        .iter()
        .filter(|(_, on)| *on)
        .map(|(r, _)| r.as_str())
        .collect();
    ep.insert("dpia.criteria".into(), criteria.join(","));
    ep.insert("reservation.reserved".into(), case.inputs.reservation.reserved.to_string());
    ep.insert(
        "reservation.basis".into(),
        enum_str(&case.inputs.reservation.basis),
    );
    ep.insert("tdm.exception".into(), outcome_str(&assessment.tdm, |t| enum_str(&t.exception)));
    ep.insert(
        "extraction.channel".into(),
        case.inputs.channel.as_str().into(),
    );
    ep.insert(
        "extraction.verdict".into(),
        outcome_str(&assessment.extraction, |x| enum_str(&x.verdict)),
    );
    ep.insert(
        "extraction.rate_limit".into(),
        outcome_str(&assessment.extraction, |x| {
            x.rate_limit
                .map(|r| format!("{}/{}s", r.capacity, r.window_secs))
                .unwrap_or_else(|| "none".into())
        }),
    );
    ep.insert(
        "extraction.limiter".into(),
        format!(
            "{}/{}s",
            limiter_config.capacity_per_window,
            limiter_config.window.as_secs()
        ),
    );
    ep.insert(
        "extraction.window".into(),
        match &window.accessible_range {
            None => "empty".into(),
            Some(r) if *r == window.requested_range => "complete".into(),
            Some(_) => "truncated".into(),
        },
    );
    let transfers: Vec<String> = assessment
        .transfers
        .iter()
        .map(|t| outcome_str(t, |a| a.mechanism.as_str().into()))
        .collect();
    ep.insert(
        "transfer.mechanism".into(),
        if transfers.is_empty() {
            "none_needed".into()
        } else {
            transfers.join(",")
        },
    );
    for cat in DataCategory::ALL {
        let Some(p) = case.retention.policy(cat) else { continue };
        ep.insert(
            format!("retention.{}", cat.as_str()),
            format!("delete={}mo alert={}mo", p.max_months, p.max_months - p.alert_lead_months),
        );
    }
    for m in &case.manifests {
        let Some(loaded) = m.loaded_at else { continue };
        let at = |kind| {
            retention_events
                .iter()
                .find(|e: &&RetentionEvent| e.dataset_id == m.dataset_id && e.kind == kind)
                .and_then(|e| months_between(loaded, e.due_at))
                .map(|n| format!("+{n}mo"))
                .unwrap_or_else(|| "never".into())
        };
        ep.insert(
            format!("retention_events.{}", m.category.as_str()),
            format!(
                "alert={} delete={}",
                at(super::retention::RetentionEventKind::Alert),
                at(super::retention::RetentionEventKind::Delete)
            ),
        );
    }
    for (kind, d) in &assessment.distribution {
        ep.insert(format!("present.{kind}"), outcome_str(d, |d| verdict_str(d.verdict)));
    }
    ep.insert(
        "present.model_release".into(),
        outcome_str(&assessment.model_release, |m| verdict_str(m.verdict)),
    );
    ep.insert(
        "pipeline.stages".into(),
        stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>().join(","),
    );
    ep.insert(
        "pipeline.blocked".into(),
        match &blocked {
            None => "none".into(),
            Some(b) => format!(
                "{}:{}",
                b.stage,
                b.blockers.iter().map(|x| x.code.as_str()).collect::<Vec<_>>().join("+")
            ),
        },
    );
    let stage_ok = |s: StageId| stages.iter().any(|o| o.stage == s);
    ep.insert(
        "present.stage".into(),
        if stage_ok(StageId::Present) { "released" } else { "blocked" }.into(),
    );
    ep.insert(
        "dpia.stage_status".into(),
        dpia_status
            .iter()
            .map(|(s, st)| format!("{s}={}", st.as_str()))
            .collect::<Vec<_>>()
            .join(","),
    );
    ep.insert(
        "evidence".into(),
        case.evidence.iter().cloned().collect::<Vec<_>>().join(","),
    );

    let diff: Vec<EndpointDiff> = scenario
        .expected
        .iter()
        .filter(|(k, v)| ep.get(*k) != Some(v))
        .map(|(k, v)| EndpointDiff {
            key: k.clone(),
            expected: v.clone(),
            actual: ep.get(k).cloned(),
        })
        .collect();

    let report = GoldenReport {
        scenario: scenario.name.clone(),
        case_id: case.case_id.clone(),
        endpoints: ep,
        assessment,
        window,
        stages,
        blocked,
        dpia_status,
        transform_logs: connector.logs,
        k_anonymity: connector.kanon,
        retention_events,
        diff: diff.clone(),
    };
    if diff.is_empty() {
        Ok(report)
    } else {
        Err(PipelineError::GoldenMismatch {
            diff,
            report: Box::new(report),
        })
    }
}

fn enum_str<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Citations from the decisions that bear on a stage's DPIA entry.
fn stage_citations(case: &PipelineCase, stage: StageId) -> Vec<String> {
    let d = &case.decisions;
    let mut traces = Vec::new();
    match stage {
        StageId::Extract => {
            traces.extend(d.legal_basis.as_ref().map(|b| &b.trace));
            traces.extend(d.tdm.as_ref().map(|t| &t.trace));
            traces.extend(d.extraction.as_ref().map(|x| &x.trace));
        }
        StageId::Load => traces.extend(d.transfers.iter().map(|t| &t.trace)),
        _ => {}
    }
    let mut out: Vec<String> = Vec::new();
    for t in traces {
        for e in t.entries() {
            if !out.contains(&e.citation) {
                out.push(e.citation.clone());
            }
        }
    }
    out
}
