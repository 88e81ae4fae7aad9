//! Pipeline cases and gated stage execution.

use std::collections::BTreeSet;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::audit::AuditLog;
use super::connector::{Connector, StageContext, StageOutput};
use super::inputs::{CaseInputs, ErrorInfo};
use super::retention::{DatasetManifest, RetentionSchedule};
use super::PipelineError;
use crate::ledger::{gate_check, validate_case_id, Blocker, GateDecisions, LedgerStore, PipelineMode, StageId};
use crate::policy::extraction::obligation::RAW_FORM_STORAGE;
use crate::policy::{
    ControllershipAssessment, DpiaRequirement, ExtractionDecision, ExtractionVerdict, LegalBasisDecision,
    RulePackSet, TdmDecision, TransferAssessment, TransferConfig, Verdict,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDecisions {
    pub legal_basis: Option<LegalBasisDecision>,
    pub dpia_requirement: Option<DpiaRequirement>,
    pub tdm: Option<TdmDecision>,
    pub extraction: Option<ExtractionDecision>,
    pub transfers: Vec<TransferAssessment>,
    /// Decisions that could not be made, keyed by decision name.
    #[serde(default)]
    pub errors: Vec<(String, ErrorInfo)>,
}

impl CaseDecisions {
    pub fn gate(&self) -> GateDecisions<'_> {
        GateDecisions {
            legal_basis: self.legal_basis.as_ref(),
            dpia_requirement: self.dpia_requirement.as_ref(),
            tdm: self.tdm.as_ref(),
        }
    }
}

/// Shared services a stage runs against.
#[derive(Clone, Copy)]
pub struct PipelineEnv<'a> {
    pub store: &'a LedgerStore,
    pub packs: &'a RulePackSet,
    pub transfer_lists: &'a TransferConfig,
    pub audit: &'a AuditLog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCase {
    pub case_id: String,
    pub inputs: CaseInputs,
    pub mode: PipelineMode,
    pub controllership: ControllershipAssessment,
    pub decisions: CaseDecisions,
    pub manifests: Vec<DatasetManifest>,
    pub retention: RetentionSchedule,
    /// Safeguard evidence earned by stages that have run.
    pub evidence: BTreeSet<String>,
    pub stages_run: Vec<StageId>,
}

impl PipelineCase {
    pub fn new(case_id: &str, inputs: CaseInputs, mode: PipelineMode) -> Result<Self, PipelineError> {
        validate_case_id(case_id)?;
        inputs.validate()?;
        let controllership = inputs.controllership();
        Ok(PipelineCase {
            case_id: case_id.into(),
            inputs,
            mode,
            controllership,
            decisions: CaseDecisions::default(),
            manifests: Vec::new(),
            retention: RetentionSchedule::default(),
            evidence: BTreeSet::new(),
            stages_run: Vec::new(),
        })
    }

    /// Decisions lock once a stage past pre-registration has run.
    pub fn decisions_locked(&self) -> bool {
        self.stages_run.iter().any(|s| *s != StageId::PreRegistration)
    }

    /// Compute every decision from the inputs.
    pub fn decide(&mut self, transfer_lists: &TransferConfig) -> Result<&CaseDecisions, PipelineError> {
        if self.decisions_locked() {
            return Err(PipelineError::DecisionsLocked);
        }
        let mut d = CaseDecisions::default();
        let mut errors = Vec::new();
        match self.inputs.legal_basis() {
            Ok(b) => d.legal_basis = Some(b),
            Err(e) => errors.push(("legal_basis".to_string(), ErrorInfo::from(&e))),
        }
        d.dpia_requirement = Some(self.inputs.dpia());
        match self.inputs.tdm() {
            Ok(t) => {
                d.extraction = Some(crate::policy::assess_extraction(self.inputs.channel, &t, &self.inputs.context));
                d.tdm = Some(t);
            }
            Err(e) => errors.push(("tdm".to_string(), ErrorInfo::from(&e))),
        }
        for r in self.inputs.transfer_decisions(transfer_lists) {
            match r {
                Ok(t) => d.transfers.push(t),
                Err(e) => errors.push(("transfer".to_string(), ErrorInfo::from(&e))),
            }
        }
        d.errors = errors;
        self.controllership = self.inputs.controllership();
        self.decisions = d;
        Ok(&self.decisions)
    }

    /// Change the inputs after stages have run: reopen the DPIA from
    /// `earliest_affected`, forget stages from there on and decide again.
    pub fn change_inputs(
        &mut self,
        new_inputs: CaseInputs,
        description: &str,
        earliest_affected: StageId,
        env: &PipelineEnv<'_>,
        author: &str,
        now: DateTime<Utc>,
    ) -> Result<(), PipelineError> {
        new_inputs.validate()?;
        env.store
            .reopen_on_change(&self.case_id, description, earliest_affected, author, now)?;
        let from = self.mode.position(earliest_affected);
        self.stages_run.retain(|s| self.mode.position(*s) < from);
        self.inputs = new_inputs;
        env.audit.record(
            now,
            "inputs_changed",
            Some(&self.case_id),
            serde_json::json!({"description": description, "earliest_affected": earliest_affected}),
        )?;
        self.decide(env.transfer_lists)?;
        Ok(())
    }

    /// Blockers beyond the ledger gate: policy outcomes that stop a stage.
    fn policy_blockers(&self, stage: StageId, env: &PipelineEnv<'_>) -> Vec<Blocker> {
        let mut out = Vec::new();
        let blocker = |code: &str, message: String| Blocker {
            code: code.into(),
            message,
        };
        match stage {
            StageId::Extract => {
                if let Some(x) = &self.decisions.extraction {
                    let tdm_none = self.decisions.tdm.as_ref().is_some_and(|t| !t.permits_extraction());
                    if x.verdict == ExtractionVerdict::Blocked && !tdm_none {
                        out.push(blocker(
                            "extraction_blocked",
                            format!("extraction channel {} is blocked", x.channel.as_str()),
                        ));
                    }
                }
            }
            StageId::Load => {
                for (name, e) in &self.decisions.errors {
                    if name == "transfer" {
                        out.push(blocker("no_lawful_transfer", e.message.clone()));
                    }
                }
            }
            StageId::Present => {
                if let Err(e) = self.inputs.context.validate_for_present() {
                    out.push(blocker("no_intended_outputs", e.to_string()));
                }
                for kind in &self.inputs.release {
                    if !self.inputs.context.intended_outputs.contains(kind) {
                        out.push(blocker(
                            "output_not_declared",
                            format!("{kind} is released but not declared as an intended output"),
                        ));
                        continue;
                    }
                    match self.inputs.distribution(*kind, env.packs, &self.evidence) {
                        Ok(d) if d.verdict == Verdict::Blocked => out.push(blocker(
                            "distribution_blocked",
                            format!("{kind} may not be distributed"),
                        )),
                        Ok(_) => {}
                        Err(e) => out.push(blocker("distribution_undecided", format!("{kind}: {e}"))),
                    }
                }
            }
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: StageId,
    /// DPIA fields the researcher must now record for this stage.
    pub dpia_template: Vec<String>,
    pub obligations: Vec<String>,
    pub warnings: Vec<String>,
    pub output: StageOutput,
}

/// Gate, then execute, one stage. Nothing runs when the gate is blocked, and
/// a connector failure leaves the case unchanged.
pub fn run_stage(
    case: &mut PipelineCase,
    env: &PipelineEnv<'_>,
    stage: StageId,
    connector: &mut dyn Connector,
    now: DateTime<Utc>,
) -> Result<StageOutcome, PipelineError> {
    let doc = env.store.load(&case.case_id)?;
    if doc.mode != case.mode {
        return Err(PipelineError::InvalidConfig(format!(
            "case mode {:?} differs from ledger mode {:?}",
            case.mode, doc.mode
        )));
    }
    let gate = gate_check(&doc, stage, &case.decisions.gate());
    let mut blockers = gate.blockers;
    blockers.extend(case.policy_blockers(stage, env));
    if !blockers.is_empty() {
        env.audit.record(
            now,
            "stage_blocked",
            Some(&case.case_id),
            serde_json::json!({"stage": stage, "blockers": &blockers}),
        )?;
        tracing::info!(case_id = %case.case_id, %stage, "gate blocked");
        return Err(PipelineError::GateBlocked { stage, blockers });
    }

    let ctx = StageContext {
        case_id: &case.case_id,
        stage,
        mode: case.mode,
        inputs: &case.inputs,
        now,
    };
    let limit = connector.timeout();
    let started = Instant::now();
    let result = connector.execute(&ctx);
    let elapsed = started.elapsed();
    let output = match result {
        Ok(_) if elapsed > limit => {
            return Err(PipelineError::ConnectorFailure {
                stage,
                message: format!("timed out after {elapsed:?} (limit {limit:?})"),
            })
        }
        Ok(o) => o,
        Err(e) => {
            env.audit.record(
                now,
                "connector_failure",
                Some(&case.case_id),
                serde_json::json!({"stage": stage, "error": e.0}),
            )?;
            return Err(PipelineError::ConnectorFailure { stage, message: e.0 });
        }
    };
    for m in &output.manifests {
        m.validate()?;
    }

    let mut obligations = Vec::new();
    if stage == StageId::Extract {
        if let Some(t) = &case.decisions.tdm {
            obligations.extend(t.obligations.iter().cloned());
        }
        if let Some(x) = &case.decisions.extraction {
            obligations.extend(x.obligations.iter().cloned());
        }
    }
    if stage == StageId::Load && case.mode == PipelineMode::Elt {
        obligations.push(RAW_FORM_STORAGE.to_string());
    }
    obligations.dedup();

    case.manifests.extend(output.manifests.iter().cloned());
    case.evidence.extend(output.evidence.iter().cloned());
    if !case.stages_run.contains(&stage) {
        case.stages_run.push(stage);
    }
    env.audit.record(
        now,
        "stage_run",
        Some(&case.case_id),
        serde_json::json!({"stage": stage, "records": output.records, "obligations": &obligations}),
    )?;
    Ok(StageOutcome {
        stage,
        dpia_template: stage.required_fields().iter().map(|f| f.to_string()).collect(),
        obligations,
        warnings: gate.warnings,
        output,
    })
}
