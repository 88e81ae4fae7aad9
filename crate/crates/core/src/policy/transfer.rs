//! International transfer assessment (GDPR Chapter V).
//!
//! Adequacy and framework lists are configuration data: the bundled
//! `transfer_lists.json` is a snapshot and callers may load their own.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use super::types::{Region, Route};
use super::PolicyError;
use crate::trace::DecisionTrace;

const BUNDLED_LISTS: &str = include_str!("../../data/transfer_lists.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferConfig {
    #[serde(default)]
    pub as_of: Option<String>,
    pub eea: BTreeSet<Region>,
    pub adequacy: BTreeSet<Region>,
    /// Destinations with a framework that covers certified recipients (e.g. the EU-US DPF).
    #[serde(default)]
    pub dpf: BTreeSet<Region>,
}

impl TransferConfig {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_LISTS).expect("bundled transfer lists are valid")
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::SchemaViolation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PolicyError::SchemaViolation(e.to_string()))
    }

    pub fn is_eea(&self, region: &Region) -> bool {
        self.eea.contains(region)
    }

    /// Derive list-based flags for a route.
    pub fn flags(
        &self,
        route: &Route,
        recipient_dpf_certified: bool,
        scc_available: bool,
        repetitive: bool,
    ) -> TransferFlags {
        TransferFlags {
            adequacy: self.adequacy.contains(&route.dest),
            dpf_covered: recipient_dpf_certified && self.dpf.contains(&route.dest),
            scc_available,
            bcr_available: false,
            repetitive,
            derogation_ground: None,
        }
    }
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self::bundled()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferFlags {
    pub adequacy: bool,
    pub dpf_covered: bool,
    pub scc_available: bool,
    #[serde(default)]
    pub bcr_available: bool,
    pub repetitive: bool,
    #[serde(default)]
    pub derogation_ground: Option<TransferInstrument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferMechanism {
    #[serde(rename = "none_needed")]
    NoneNeeded,
    #[serde(rename = "adequacy_45")]
    Adequacy,
    #[serde(rename = "safeguards_46")]
    Safeguards,
    #[serde(rename = "derogation_49")]
    Derogation,
}

impl TransferMechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            TransferMechanism::NoneNeeded => "none_needed",
            TransferMechanism::Adequacy => "adequacy_45",
            TransferMechanism::Safeguards => "safeguards_46",
            TransferMechanism::Derogation => "derogation_49",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferInstrument {
    Scc,
    Bcr,
    AdminArrangement,
    ExplicitConsent,
    PublicInterest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferAssessment {
    pub route: Route,
    pub mechanism: TransferMechanism,
    pub instrument: Option<TransferInstrument>,
    pub trace: DecisionTrace,
}

pub fn assess_transfer(
    route: &Route,
    flags: &TransferFlags,
    lists: &TransferConfig,
) -> Result<TransferAssessment, PolicyError> {
    if route.source.as_str().is_empty() || route.dest.as_str().is_empty() {
        return Err(PolicyError::InvalidContext("transfer route regions must be named".into()));
    }
    let mut trace = DecisionTrace::new();
    trace.fire(
        RuleId::StorageDestination,
        route,
        format!("{} -> {}", route.source, route.dest),
    );
    let done = |mechanism, instrument, trace| {
        Ok(TransferAssessment {
            route: route.clone(),
            mechanism,
            instrument,
            trace,
        })
    };

    let internal = route.source == route.dest
        || (lists.is_eea(&route.source) && lists.is_eea(&route.dest));
    if internal {
        trace.fire(RuleId::StorageIntraEea, route, "no international transfer");
        return done(TransferMechanism::NoneNeeded, None, trace);
    }
    if flags.adequacy || flags.dpf_covered {
        trace.fire(
            RuleId::StorageAdequacy,
            &(flags.adequacy, flags.dpf_covered),
            if flags.adequacy {
                "destination covered by an adequacy decision"
            } else {
                "recipient certified under the Data Privacy Framework"
            },
        );
        return done(TransferMechanism::Adequacy, None, trace);
    }
    if flags.scc_available || flags.bcr_available {
        let instrument = if flags.scc_available {
            TransferInstrument::Scc
        } else {
            TransferInstrument::Bcr
        };
        trace.fire(
            RuleId::StorageSafeguards,
            &instrument,
            format!("appropriate safeguards via {instrument:?}"),
        );
        return done(TransferMechanism::Safeguards, Some(instrument), trace);
    }
    if !flags.repetitive {
        trace.fire(
            RuleId::StorageDerogation,
            &flags.derogation_ground,
            "non-repetitive, non-systematic transfer under a specific derogation",
        );
        return done(TransferMechanism::Derogation, flags.derogation_ground, trace);
    }
    Err(PolicyError::NoLawfulRoute {
        route: route.clone(),
    })
}
