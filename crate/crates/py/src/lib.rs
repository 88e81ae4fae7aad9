//! Python bindings.
//!
//! Structured values cross the boundary as plain Python objects (dicts,
//! lists, strings) in the same JSON shapes the CLI and HTTP API use.
//! Failures raise `petlp.PetlpError(code, message)`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use chrono::{DateTime, Utc};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use petlp_core::ledger::{export_report, gate_check, GateDecisions, LedgerStore, PipelineMode, ReportFormat, StageId};
use petlp_core::optout::{self, TimeRange};
use petlp_core::pipeline::{
    retention_tick as tick, run_golden_case, run_golden_scenario, CaseInputs, DatasetManifest, GoldenScenario,
    Permit, PipelineError, RateLimiterConfig, RetentionSchedule, RetentionState, SlidingWindowLimiter,
};
use petlp_core::policy::{manifest, RulePackSet, TransferConfig};
use petlp_core::questionnaire::{AnswerRequest, CaseService, CreateCaseRequest, WhatIfRequest};
use petlp_core::transform::{self, CorpusDoc, DpMechanism, DpReleaseSpec, MinimisationPlan, PseudonymisationSpec, Record, Salt};

create_exception!(petlp, PetlpError, PyException);

fn err(code: &str, message: impl ToString) -> PyErr {
    PetlpError::new_err((code.to_string(), message.to_string()))
}

trait Coded {
    fn code(&self) -> &'static str;
}

macro_rules! coded {
    ($($t:ty),*) => {$(
        impl Coded for $t {
            fn code(&self) -> &'static str {
                <$t>::code(self)
            }
        }
    )*};
}

coded!(
    petlp_core::ledger::LedgerError,
    petlp_core::policy::PolicyError,
    petlp_core::transform::TransformError,
    petlp_core::optout::OptOutError,
    petlp_core::questionnaire::QuestionnaireError,
    PipelineError
);

fn raise<E: Coded + std::fmt::Display>(e: E) -> PyErr {
    err(e.code(), e)
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| err("serialisation", e))?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (s,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = PyModule::import(obj.py(), "json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&s).map_err(|e| err("invalid_input", e))
}

fn instant(s: &str) -> PyResult<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.to_utc())
        .map_err(|e| err("invalid_timestamp", format!("{s:?}: {e}")))
}

fn instant_or_now(s: Option<&str>) -> PyResult<DateTime<Utc>> {
    s.map_or_else(|| Ok(Utc::now()), instant)
}

fn stage(s: &str) -> PyResult<StageId> {
    StageId::parse(s).ok_or_else(|| err("invalid_stage", format!("unknown stage {s:?}")))
}

fn mode(s: &str) -> PyResult<PipelineMode> {
    match s {
        "etl" => Ok(PipelineMode::Etl),
        "elt" => Ok(PipelineMode::Elt),
        _ => Err(err("invalid_mode", format!("unknown mode {s:?}"))),
    }
}

/// Every decision for a case (dict of case inputs).
#[pyfunction]
fn assess(py: Python<'_>, case: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let inputs: CaseInputs = from_py(case)?;
    inputs.validate().map_err(raise)?;
    to_py(py, &inputs.assess(&RulePackSet::bundled(), &TransferConfig::bundled(), &BTreeSet::new()))
}

/// The rules manifest.
#[pyfunction]
fn rules(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &manifest())
}

/// Run a golden scenario file, or the bundled one. Returns the report; a
/// mismatch is reported in `diff` rather than raised.
#[pyfunction]
#[pyo3(signature = (scenario=None))]
fn golden(py: Python<'_>, scenario: Option<&str>) -> PyResult<Py<PyAny>> {
    let r = match scenario {
        Some(p) => run_golden_case(std::path::Path::new(p)),
        None => run_golden_scenario(&GoldenScenario::bundled()),
    };
    match r {
        Ok(report) => to_py(py, &report),
        Err(PipelineError::GoldenMismatch { report, .. }) => to_py(py, &*report),
        Err(e) => Err(raise(e)),
    }
}

#[pyfunction]
fn parse_robots(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let (policy, diagnostics) = optout::parse_robots_with_diagnostics(text);
    to_py(py, &serde_json::json!({"policy": policy, "diagnostics": diagnostics}))
}

#[pyfunction]
fn is_allowed(text: &str, agent: &str, path: &str) -> bool {
    optout::is_allowed(&optout::parse_robots(text), agent, path)
}

/// Reservation status for a research scope.
#[pyfunction]
#[pyo3(signature = (robots_txt, agent, scope_paths, tos_flag=false, llms_txt=None))]
fn tdm_reservation(
    py: Python<'_>,
    robots_txt: &str,
    agent: &str,
    scope_paths: Vec<String>,
    tos_flag: bool,
    llms_txt: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let robots = optout::tdm_reservation(&optout::parse_robots(robots_txt), agent, &scope_paths).map_err(raise)?;
    let llms = optout::detect_llms_txt(llms_txt.is_some(), llms_txt);
    to_py(py, &optout::combine(&robots, tos_flag, &llms))
}

#[pyfunction]
#[pyo3(signature = (start, end, now=None, rolling_months=optout::DEFAULT_ROLLING_MONTHS))]
fn plan_window(py: Python<'_>, start: &str, end: &str, now: Option<&str>, rolling_months: u32) -> PyResult<Py<PyAny>> {
    let r = optout::plan_window(TimeRange::new(instant(start)?, instant(end)?), instant_or_now(now)?, rolling_months)
        .map_err(raise)?;
    to_py(py, &r)
}

/// Returns `(records, log)`.
#[pyfunction]
fn minimise(py: Python<'_>, records: &Bound<'_, PyAny>, plan: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let records: Vec<Record> = from_py(records)?;
    let plan: MinimisationPlan = from_py(plan)?;
    let r = transform::apply_minimisation(&records, &plan).map_err(raise)?;
    to_py(py, &r)
}

/// Returns `(records, log)`. `spec` defaults to the Reddit spec.
#[pyfunction]
#[pyo3(signature = (records, salt=None, spec=None))]
fn pseudonymise(
    py: Python<'_>,
    records: &Bound<'_, PyAny>,
    salt: Option<Vec<u8>>,
    spec: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let records: Vec<Record> = from_py(records)?;
    let spec: PseudonymisationSpec = match spec {
        Some(s) => from_py(s)?,
        None => PseudonymisationSpec::reddit_default(),
    };
    let salt = salt.map(Salt::new).transpose().map_err(raise)?;
    let r = transform::pseudonymise(&records, &spec, salt.as_ref()).map_err(raise)?;
    to_py(py, &r)
}

/// Returns `(records, log)`.
#[pyfunction]
fn generalise(py: Python<'_>, records: &Bound<'_, PyAny>, fields: Vec<String>) -> PyResult<Py<PyAny>> {
    let records: Vec<Record> = from_py(records)?;
    let r = transform::generalise_timestamps(&records, &fields).map_err(raise)?;
    to_py(py, &r)
}

#[pyfunction]
fn k_anonymity(py: Python<'_>, records: &Bound<'_, PyAny>, quasi_identifiers: Vec<String>, k: usize) -> PyResult<Py<PyAny>> {
    let records: Vec<Record> = from_py(records)?;
    let r = transform::k_anonymity(&records, &quasi_identifiers, k).map_err(raise)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (counts, epsilon, seed, sensitivity=1.0))]
fn dp_release(counts: Vec<f64>, epsilon: f64, seed: u64, sensitivity: f64) -> PyResult<Vec<f64>> {
    let spec = DpReleaseSpec {
        epsilon,
        sensitivity,
        mechanism: DpMechanism::Laplace,
    };
    transform::dp_release(&counts, &spec, seed).map_err(raise)
}

/// `corpus` is a list of `{"id", "text"}` dicts.
#[pyfunction]
#[pyo3(signature = (text, corpus, threshold_words=transform::DEFAULT_THRESHOLD_WORDS))]
fn leak_scan(py: Python<'_>, text: &str, corpus: &Bound<'_, PyAny>, threshold_words: usize) -> PyResult<Py<PyAny>> {
    let corpus: Vec<CorpusDoc> = from_py(corpus)?;
    to_py(py, &transform::scan_verbatim_leak(text, &corpus, threshold_words))
}

/// Retention events due at `now` for fresh state. `schedule` defaults to
/// the built-in one.
#[pyfunction]
#[pyo3(signature = (manifests, now, schedule=None))]
fn retention_tick(
    py: Python<'_>,
    manifests: &Bound<'_, PyAny>,
    now: &str,
    schedule: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let manifests: Vec<DatasetManifest> = from_py(manifests)?;
    let schedule: RetentionSchedule = match schedule {
        Some(s) => from_py(s)?,
        None => RetentionSchedule::default(),
    };
    let events = tick(&schedule, &manifests, instant(now)?, &mut RetentionState::default()).map_err(raise)?;
    to_py(py, &events)
}

/// Sliding-window limiter on a caller-supplied clock (seconds).
#[pyclass(name = "RateLimiter")]
struct PyRateLimiter {
    inner: SlidingWindowLimiter,
}

#[pymethods]
impl PyRateLimiter {
    #[new]
    #[pyo3(signature = (capacity=100, window_secs=60.0))]
    fn new(capacity: u32, window_secs: f64) -> PyResult<Self> {
        let window = Duration::try_from_secs_f64(window_secs).map_err(|e| err("invalid_config", e))?;
        let inner = SlidingWindowLimiter::new(RateLimiterConfig {
            capacity_per_window: capacity,
            window,
        })
        .map_err(raise)?;
        Ok(PyRateLimiter { inner })
    }

    /// `None` when granted, else seconds until a permit frees up.
    fn acquire(&self, now_secs: f64) -> PyResult<Option<f64>> {
        let now = Duration::try_from_secs_f64(now_secs).map_err(|e| err("invalid_time", e))?;
        Ok(match self.inner.acquire_permit(now) {
            Permit::Granted => None,
            Permit::RetryAfter { after } => Some(after.as_secs_f64()),
        })
    }
}

/// DPIA ledger in a directory, or in memory when none is given.
#[pyclass(name = "Ledger")]
struct PyLedger {
    store: LedgerStore,
}

fn status(py: Python<'_>, doc: &petlp_core::ledger::DpiaDocument) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &serde_json::json!({"case_id": doc.case_id, "version": doc.version(), "stage_status": doc.stage_status()}),
    )
}

#[pymethods]
impl PyLedger {
    #[new]
    #[pyo3(signature = (directory=None))]
    fn new(directory: Option<&str>) -> PyResult<Self> {
        let store = match directory {
            Some(d) => LedgerStore::open(d).map_err(raise)?,
            None => LedgerStore::in_memory(),
        };
        Ok(PyLedger { store })
    }

    #[pyo3(signature = (case_id, fields, mode="etl", author="researcher", timestamp=None))]
    fn init(
        &self,
        py: Python<'_>,
        case_id: &str,
        fields: BTreeMap<String, String>,
        mode: &str,
        author: &str,
        timestamp: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let doc = self
            .store
            .init(case_id, self::mode(mode)?, fields, author, instant_or_now(timestamp)?)
            .map_err(raise)?;
        status(py, &doc)
    }

    #[pyo3(signature = (case_id, stage, fields, citations=Vec::new(), author="researcher", timestamp=None))]
    #[allow(clippy::too_many_arguments)]
    fn update(
        &self,
        py: Python<'_>,
        case_id: &str,
        stage: &str,
        fields: BTreeMap<String, String>,
        citations: Vec<String>,
        author: &str,
        timestamp: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let doc = self
            .store
            .record_update(case_id, self::stage(stage)?, fields, citations, author, instant_or_now(timestamp)?)
            .map_err(raise)?;
        status(py, &doc)
    }

    #[pyo3(signature = (case_id, stage, description, author="researcher", timestamp=None))]
    fn reopen(
        &self,
        py: Python<'_>,
        case_id: &str,
        stage: &str,
        description: &str,
        author: &str,
        timestamp: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let doc = self
            .store
            .reopen_on_change(case_id, description, self::stage(stage)?, author, instant_or_now(timestamp)?)
            .map_err(raise)?;
        status(py, &doc)
    }

    fn status(&self, py: Python<'_>, case_id: &str) -> PyResult<Py<PyAny>> {
        status(py, &self.store.load(case_id).map_err(raise)?)
    }

    /// Gate result for a stage, checked against the decisions for `case`.
    #[pyo3(signature = (case_id, stage, case=None))]
    fn gate(&self, py: Python<'_>, case_id: &str, stage: &str, case: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
        let doc = self.store.load(case_id).map_err(raise)?;
        let inputs: Option<CaseInputs> = case.map(from_py).transpose()?;
        let (lb, dpia, tdm) = match &inputs {
            Some(i) => (i.legal_basis().ok(), Some(i.dpia()), i.tdm().ok()),
            None => (None, None, None),
        };
        let decisions = GateDecisions {
            legal_basis: lb.as_ref(),
            dpia_requirement: dpia.as_ref(),
            tdm: tdm.as_ref(),
        };
        to_py(py, &gate_check(&doc, self::stage(stage)?, &decisions))
    }

    #[pyo3(signature = (case_id, format="markdown"))]
    fn export(&self, case_id: &str, format: &str) -> PyResult<String> {
        let f = ReportFormat::parse(format).ok_or_else(|| err("invalid_format", format!("unknown format {format:?}")))?;
        Ok(export_report(&self.store.load(case_id).map_err(raise)?, f))
    }
}

/// The questionnaire service behind the HTTP API, in process.
#[pyclass(name = "Questionnaire")]
struct PyQuestionnaire {
    inner: CaseService,
}

#[pymethods]
impl PyQuestionnaire {
    #[new]
    fn new() -> Self {
        PyQuestionnaire {
            inner: CaseService::in_memory(),
        }
    }

    fn trees(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.trees())
    }

    #[pyo3(signature = (request=None))]
    fn create_case(&self, py: Python<'_>, request: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
        let req: CreateCaseRequest = request.map(from_py).transpose()?.unwrap_or_default();
        to_py(py, &self.inner.create_case(req).map_err(raise)?)
    }

    fn get_case(&self, py: Python<'_>, case_id: &str) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.get_case(case_id).map_err(raise)?)
    }

    fn answer(&self, py: Python<'_>, case_id: &str, tree: &str, node_id: &str, choice: &str) -> PyResult<Py<PyAny>> {
        let req = AnswerRequest {
            tree: tree.into(),
            node_id: node_id.into(),
            choice: choice.into(),
        };
        to_py(py, &self.inner.answer(case_id, &req).map_err(raise)?)
    }

    fn whatif(&self, py: Python<'_>, case_id: &str, node_id: &str, choice: &str) -> PyResult<Py<PyAny>> {
        let req = WhatIfRequest {
            node_id: node_id.into(),
            choice: choice.into(),
        };
        to_py(py, &self.inner.whatif(case_id, &req).map_err(raise)?)
    }

    fn dpia(&self, py: Python<'_>, case_id: &str) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.dpia(case_id).map_err(raise)?)
    }
}

#[pymodule]
pub fn petlp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PetlpError", m.py().get_type::<PetlpError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(assess, m)?)?;
    m.add_function(wrap_pyfunction!(rules, m)?)?;
    m.add_function(wrap_pyfunction!(golden, m)?)?;
    m.add_function(wrap_pyfunction!(parse_robots, m)?)?;
    m.add_function(wrap_pyfunction!(is_allowed, m)?)?;
    m.add_function(wrap_pyfunction!(tdm_reservation, m)?)?;
    m.add_function(wrap_pyfunction!(plan_window, m)?)?;
    m.add_function(wrap_pyfunction!(minimise, m)?)?;
    m.add_function(wrap_pyfunction!(pseudonymise, m)?)?;
    m.add_function(wrap_pyfunction!(generalise, m)?)?;
    m.add_function(wrap_pyfunction!(k_anonymity, m)?)?;
    m.add_function(wrap_pyfunction!(dp_release, m)?)?;
    m.add_function(wrap_pyfunction!(leak_scan, m)?)?;
    m.add_function(wrap_pyfunction!(retention_tick, m)?)?;
    m.add_class::<PyRateLimiter>()?;
    m.add_class::<PyLedger>()?;
    m.add_class::<PyQuestionnaire>()?;
    Ok(())
}
