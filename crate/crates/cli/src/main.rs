//! `petlp`: policy decisions, the DPIA ledger, opt-out scanning and
//! privacy transforms from the shell.
//!
//! Results go to stdout as JSON. Errors go to stderr as
//! `{"code": ..., "message": ...}`. Exit status: 0 on success, 1 on error,
//! 3 when a check ran and failed (blocked gate, golden mismatch, k-anonymity
//! violation, verbatim leak).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use petlp_core::ledger::{export_report, gate_check, GateDecisions, LedgerStore, PipelineMode, ReportFormat, StageId};
use petlp_core::optout::{
    combine, detect_llms_txt, is_allowed, parse_robots_with_diagnostics, plan_window, tdm_reservation, TimeRange,
    DEFAULT_ROLLING_MONTHS,
};
use petlp_core::pipeline::{
    retention_tick, run_golden_case, run_golden_scenario, CaseInputs, DatasetManifest, GoldenReport, GoldenScenario,
    PipelineError, RetentionSchedule, RetentionState,
};
use petlp_core::policy::{load_rule_pack, manifest, RulePackSet, TransferConfig};
use petlp_core::questionnaire::CaseService;
use petlp_core::transform::{
    apply_minimisation, dp_release, generalise_timestamps, k_anonymity, pseudonymise, read_jsonl,
    scan_verbatim_leak, write_jsonl, CorpusDoc, DpMechanism, DpReleaseSpec, MinimisationPlan, PseudonymisationSpec,
    Record, Salt, TransformLog, DEFAULT_THRESHOLD_WORDS,
};

#[derive(Debug, Error)]
#[error("{message}")]
struct CliError {
    code: String,
    message: String,
}

impl CliError {
    fn new(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.into(),
            message: message.into(),
        }
    }
}

macro_rules! from_coded {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(e.code(), e.to_string())
            }
        }
    )*};
}

from_coded!(
    petlp_core::ledger::LedgerError,
    petlp_core::policy::PolicyError,
    petlp_core::transform::TransformError,
    petlp_core::optout::OptOutError,
    petlp_core::questionnaire::QuestionnaireError
);

/// What a command printed: a result, or the report of a check that failed.
enum Outcome {
    Ok(serde_json::Value),
    CheckFailed(serde_json::Value),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

type CliResult = Result<Outcome, CliError>;

fn ok<T: Serialize>(v: &T) -> CliResult {
    Ok(Outcome::Ok(serde_json::to_value(v).expect("output serialises")))
}

#[derive(Parser)]
#[command(name = "petlp", version, about = "Compliance-aware ETLP pipeline toolkit")]
struct Cli {
    /// Directory holding DPIA ledgers.
    #[arg(long, global = true, env = "PETLP_LEDGER_DIR", default_value = "dpia")]
    ledger_dir: PathBuf,
    /// Extra platform rule pack (JSON); repeatable.
    #[arg(long = "rule-pack", global = true)]
    rule_packs: Vec<PathBuf>,
    /// Transfer lists replacing the bundled ones.
    #[arg(long, global = true)]
    transfer_lists: Option<PathBuf>,
    /// Log at debug level.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every decision for a case file.
    Assess {
        /// Case inputs (JSON).
        case: PathBuf,
    },
    /// Print the rules manifest.
    Rules,
    /// Living DPIA ledger.
    #[command(subcommand)]
    Dpia(DpiaCommand),
    /// Parse robots.txt and decide whether the research scope is reserved.
    ScanRobots(ScanRobotsArgs),
    /// Clip a requested extraction range to the API retrieval horizon.
    PlanWindow {
        #[arg(long)]
        start: DateTime<Utc>,
        #[arg(long)]
        end: DateTime<Utc>,
        /// Defaults to the current time.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        #[arg(long, default_value_t = DEFAULT_ROLLING_MONTHS)]
        rolling_months: u32,
    },
    /// Record transforms over JSONL files.
    #[command(subcommand)]
    Transform(TransformCommand),
    /// Emit retention alerts and deletions due at `now`.
    RetentionTick {
        /// Dataset manifests (JSON array).
        manifests: PathBuf,
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        /// Retention schedule (JSON); defaults apply otherwise.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Emitted-event state, read and rewritten so events fire once.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Run the golden scenario and diff its endpoints against expectations.
    Golden {
        /// Scenario file; the bundled case study otherwise.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Print the full report instead of the summary.
        #[arg(long)]
        full: bool,
    },
    /// Serve the questionnaire and ledger HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Keep ledgers in memory instead of the ledger directory.
        #[arg(long)]
        in_memory: bool,
    },
}

#[derive(Subcommand)]
enum DpiaCommand {
    /// Create a ledger with its pre-registration entry.
    Init {
        case_id: String,
        #[arg(long, value_enum, default_value = "etl")]
        mode: Mode,
        /// File holding the pre-registration fields as a JSON object.
        #[arg(long)]
        fields: PathBuf,
        #[arg(long, default_value = "researcher")]
        author: String,
    },
    /// Append a stage entry.
    Update {
        case_id: String,
        #[arg(long)]
        stage: String,
        /// File holding the stage fields as a JSON object.
        #[arg(long)]
        fields: PathBuf,
        #[arg(long = "citation")]
        citations: Vec<String>,
        #[arg(long, default_value = "researcher")]
        author: String,
    },
    /// Mark stages from `--stage` onward stale after a change.
    Reopen {
        case_id: String,
        #[arg(long)]
        stage: String,
        #[arg(long)]
        description: String,
        #[arg(long, default_value = "researcher")]
        author: String,
    },
    /// Check whether a stage may run.
    Gate {
        case_id: String,
        #[arg(long)]
        stage: String,
        /// Case inputs whose decisions the gate checks.
        #[arg(long)]
        case: Option<PathBuf>,
    },
    /// Render the ledger.
    Export {
        case_id: String,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Etl,
    Elt,
}

impl From<Mode> for PipelineMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Etl => PipelineMode::Etl,
            Mode::Elt => PipelineMode::Elt,
        }
    }
}

#[derive(Args)]
struct ScanRobotsArgs {
    /// robots.txt file.
    robots: PathBuf,
    #[arg(long, default_value = "*")]
    agent: String,
    /// Research scope path; repeatable.
    #[arg(long = "path", required = true)]
    paths: Vec<String>,
    /// The operator declares its terms of service a reservation.
    #[arg(long)]
    tos_flag: bool,
    /// llms.txt file, if the site has one.
    #[arg(long)]
    llms_txt: Option<PathBuf>,
}

#[derive(Args)]
struct Io {
    /// Input records (JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Output records (JSONL).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum TransformCommand {
    /// Keep allowlisted fields only.
    Minimise {
        #[command(flatten)]
        io: Io,
        /// Minimisation plan (JSON).
        #[arg(long)]
        plan: PathBuf,
    },
    /// Drop, hash and scrub identifiers.
    Pseudonymise {
        #[command(flatten)]
        io: Io,
        /// Pseudonymisation spec (JSON); the Reddit default otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Salt file; falls back to PETLP_SALT_FILE.
        #[arg(long)]
        salt_file: Option<PathBuf>,
    },
    /// Replace timestamps with ISO week labels.
    Generalise {
        #[command(flatten)]
        io: Io,
        #[arg(long = "field", required = true)]
        fields: Vec<String>,
    },
    /// Audit k-anonymity over quasi-identifiers.
    Kanon {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "qi", required = true)]
        quasi_identifiers: Vec<String>,
        #[arg(long)]
        k: usize,
    },
    /// Release counts with Laplace noise.
    DpRelease {
        /// Counts (JSON array of numbers).
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        sensitivity: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Find verbatim word runs shared with the source corpus.
    LeakScan {
        /// Text to be published.
        #[arg(long)]
        text: PathBuf,
        /// Corpus (JSONL of {"id", "text"}).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_WORDS)]
        threshold: usize,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new("io_error", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::new("io_error", format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::new("invalid_input", format!("{}: {e}", path.display())))
}

fn stage(s: &str) -> Result<StageId, CliError> {
    StageId::parse(s).ok_or_else(|| CliError::new("invalid_stage", format!("unknown stage {s:?}")))
}

struct Env {
    packs: RulePackSet,
    lists: TransferConfig,
}

fn env(cli: &Cli) -> Result<Env, CliError> {
    let mut packs = RulePackSet::bundled();
    for p in &cli.rule_packs {
        packs.insert(load_rule_pack(&read(p)?)?);
    }
    let lists = match &cli.transfer_lists {
        Some(p) => TransferConfig::load(p)?,
        None => TransferConfig::bundled(),
    };
    Ok(Env { packs, lists })
}

fn load_records(path: &Path) -> Result<Vec<Record>, CliError> {
    Ok(read_jsonl(&read(path)?)?)
}

fn finish(io: &Io, records: &[Record], log: &TransformLog) -> CliResult {
    write(&io.output, &write_jsonl(records))?;
    ok(log)
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Assess { case } => {
            let env = env(cli)?;
            let inputs: CaseInputs = read_json(case)?;
            inputs.validate()?;
            ok(&inputs.assess(&env.packs, &env.lists, &BTreeSet::new()))
        }
        Command::Rules => ok(&manifest()),
        Command::Dpia(cmd) => dpia(cli, cmd),
        Command::ScanRobots(a) => scan_robots(a),
        Command::PlanWindow {
            start,
            end,
            now,
            rolling_months,
        } => ok(&plan_window(
            TimeRange::new(*start, *end),
            now.unwrap_or_else(Utc::now),
            *rolling_months,
        )?),
        Command::Transform(cmd) => transform(cmd),
        Command::RetentionTick {
            manifests,
            now,
            schedule,
            state,
        } => {
            let manifests: Vec<DatasetManifest> = read_json(manifests)?;
            let schedule: RetentionSchedule = match schedule {
                Some(p) => read_json(p)?,
                None => RetentionSchedule::default(),
            };
            let mut st = match state {
                Some(p) if p.exists() => read_json(p)?,
                _ => RetentionState::default(),
            };
            let events = retention_tick(&schedule, &manifests, now.unwrap_or_else(Utc::now), &mut st)?;
            if let Some(p) = state {
                write(p, &serde_json::to_string_pretty(&st).expect("state serialises"))?;
            }
            ok(&events)
        }
        Command::Golden { scenario, full } => {
            let result = match scenario {
                Some(p) => run_golden_case(p),
                None => run_golden_scenario(&GoldenScenario::bundled()),
            };
            let summary = |r: &GoldenReport| {
                if *full {
                    serde_json::to_value(r).expect("report serialises")
                } else {
                    json!({
                        "scenario": r.scenario,
                        "case_id": r.case_id,
                        "endpoints": r.endpoints,
                        "diff": r.diff,
                    })
                }
            };
            match result {
                Ok(r) => Ok(Outcome::Ok(summary(&r))),
                Err(PipelineError::GoldenMismatch { report, .. }) => Ok(Outcome::CheckFailed(summary(&report))),
                Err(e) => Err(e.into()),
            }
        }
        Command::Serve { addr, in_memory } => {
            let env = env(cli)?;
            let store = if *in_memory {
                LedgerStore::in_memory()
            } else {
                LedgerStore::open(&cli.ledger_dir)?
            };
            let service = CaseService::new(store, env.packs, env.lists);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io_error", e.to_string()))?;
            rt.block_on(petlp_server::serve(service, *addr))
                .map_err(|e| CliError::new("io_error", e.to_string()))?;
            ok(&json!({"stopped": true}))
        }
    }
}

fn dpia(cli: &Cli, cmd: &DpiaCommand) -> CliResult {
    let store = LedgerStore::open(&cli.ledger_dir)?;
    let now = Utc::now();
    match cmd {
        DpiaCommand::Init {
            case_id,
            mode,
            fields,
            author,
        } => {
            let fields: BTreeMap<String, String> = read_json(fields)?;
            let doc = store.init(case_id, (*mode).into(), fields, author, now)?;
            ok(&json!({"case_id": doc.case_id, "version": doc.version(), "stage_status": doc.stage_status()}))
        }
        DpiaCommand::Update {
            case_id,
            stage: s,
            fields,
            citations,
            author,
        } => {
            let fields: BTreeMap<String, String> = read_json(fields)?;
            let doc = store.record_update(case_id, stage(s)?, fields, citations.clone(), author, now)?;
            ok(&json!({"case_id": doc.case_id, "version": doc.version(), "stage_status": doc.stage_status()}))
        }
        DpiaCommand::Reopen {
            case_id,
            stage: s,
            description,
            author,
        } => {
            let doc = store.reopen_on_change(case_id, description, stage(s)?, author, now)?;
            ok(&json!({"case_id": doc.case_id, "version": doc.version(), "stage_status": doc.stage_status()}))
        }
        DpiaCommand::Gate { case_id, stage: s, case } => {
            let doc = store.load(case_id)?;
            let decided = match case {
                Some(p) => {
                    let inputs: CaseInputs = read_json(p)?;
                    inputs.validate()?;
                    Some((inputs.legal_basis().ok(), inputs.dpia(), inputs.tdm().ok()))
                }
                None => None,
            };
            let decisions = match &decided {
                Some((l, d, t)) => GateDecisions {
                    legal_basis: l.as_ref(),
                    dpia_requirement: Some(d),
                    tdm: t.as_ref(),
                },
                None => GateDecisions {
                    legal_basis: None,
                    dpia_requirement: None,
                    tdm: None,
                },
            };
            let gate = gate_check(&doc, stage(s)?, &decisions);
            let v = serde_json::to_value(&gate).expect("gate serialises");
            Ok(if gate.allowed { Outcome::Ok(v) } else { Outcome::CheckFailed(v) })
        }
        DpiaCommand::Export { case_id, format } => {
            let f = ReportFormat::parse(format)
                .ok_or_else(|| CliError::new("invalid_format", format!("unknown format {format:?}")))?;
            let doc = store.load(case_id)?;
            let text = export_report(&doc, f);
            Ok(Outcome::Ok(match f {
                ReportFormat::Json => serde_json::from_str(&text).expect("report is JSON"),
                ReportFormat::Markdown => serde_json::Value::String(text),
            }))
        }
    }
}

fn scan_robots(a: &ScanRobotsArgs) -> CliResult {
    let bytes = fs::read(&a.robots).map_err(|e| CliError::new("io_error", format!("{}: {e}", a.robots.display())))?;
    let (policy, diagnostics) = parse_robots_with_diagnostics(&String::from_utf8_lossy(&bytes));
    let robots = tdm_reservation(&policy, &a.agent, &a.paths)?;
    let llms = match &a.llms_txt {
        Some(p) => detect_llms_txt(true, Some(&read(p)?)),
        None => detect_llms_txt(false, None),
    };
    let paths: BTreeMap<&str, bool> = a
        .paths
        .iter()
        .map(|p| (p.as_str(), is_allowed(&policy, &a.agent, p)))
        .collect();
    ok(&json!({
        "agent": a.agent,
        "allowed": paths,
        "reservation": combine(&robots, a.tos_flag, &llms),
        "diagnostics": diagnostics,
        "policy": policy,
    }))
}

fn transform(cmd: &TransformCommand) -> CliResult {
    match cmd {
        TransformCommand::Minimise { io, plan } => {
            let plan: MinimisationPlan = read_json(plan)?;
            let (out, log) = apply_minimisation(&load_records(&io.input)?, &plan)?;
            finish(io, &out, &log)
        }
        TransformCommand::Pseudonymise { io, spec, salt_file } => {
            let spec = match spec {
                Some(p) => read_json(p)?,
                None => PseudonymisationSpec::reddit_default(),
            };
            let salt = match salt_file {
                Some(p) => Some(Salt::from_file(p)?),
                None => Salt::from_env()?,
            };
            let (out, log) = pseudonymise(&load_records(&io.input)?, &spec, salt.as_ref())?;
            finish(io, &out, &log)
        }
        TransformCommand::Generalise { io, fields } => {
            let (out, log) = generalise_timestamps(&load_records(&io.input)?, fields)?;
            finish(io, &out, &log)
        }
        TransformCommand::Kanon {
            input,
            quasi_identifiers,
            k,
        } => {
            let report = k_anonymity(&load_records(input)?, quasi_identifiers, *k)?;
            let v = serde_json::to_value(&report).expect("report serialises");
            Ok(if report.satisfies() { Outcome::Ok(v) } else { Outcome::CheckFailed(v) })
        }
        TransformCommand::DpRelease {
            counts,
            epsilon,
            sensitivity,
            seed,
        } => {
            let counts: Vec<f64> = read_json(counts)?;
            let spec = DpReleaseSpec {
                epsilon: *epsilon,
                sensitivity: *sensitivity,
                mechanism: DpMechanism::Laplace,
            };
            let noisy = dp_release(&counts, &spec, *seed)?;
            ok(&json!({"epsilon": epsilon, "sensitivity": sensitivity, "scale": spec.scale(), "seed": seed, "counts": noisy}))
        }
        TransformCommand::LeakScan { text, corpus, threshold } => {
            let corpus: Vec<CorpusDoc> = read(corpus)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| {
                    serde_json::from_str(l)
                        .map_err(|e| CliError::new("invalid_input", format!("corpus line {}: {e}", i + 1)))
                })
                .collect::<Result<_, _>>()?;
            let report = scan_verbatim_leak(&read(text)?, &corpus, *threshold);
            let v = serde_json::to_value(&report).expect("report serialises");
            Ok(if report.passed() { Outcome::Ok(v) } else { Outcome::CheckFailed(v) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .with_writer(std::io::stderr)
        .init();

    // A closed pipe (e.g. `| head`) is not an error worth a panic.
    let print = |v: &serde_json::Value| {
        let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("json"));
    };
    match run(&cli) {
        Ok(Outcome::Ok(v)) => {
            print(&v);
            ExitCode::SUCCESS
        }
        Ok(Outcome::CheckFailed(v)) => {
            print(&v);
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("{}", json!({"code": e.code, "message": e.message}));
            ExitCode::FAILURE
        }
    }
}
