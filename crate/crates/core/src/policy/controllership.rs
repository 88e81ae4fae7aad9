//! Controller allocation. Recorded on the case as metadata only.

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllershipInputs {
    pub researcher_determines_purposes: bool,
    pub researcher_determines_means: bool,
    pub institution_determines_purposes_or_means: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllershipRole {
    JointControllers,
    ResearcherSoleController,
    InstitutionController,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllershipAssessment {
    pub role: ControllershipRole,
    pub trace: DecisionTrace,
}

pub fn assess_controllership(inputs: &ControllershipInputs) -> ControllershipAssessment {
    let mut trace = DecisionTrace::new();
    trace.fire(
        RuleId::ControllerPurposes,
        &inputs.researcher_determines_purposes,
        if inputs.researcher_determines_purposes {
            "researcher determines purposes"
        } else {
            "purposes set elsewhere"
        },
    );
    trace.fire(
        RuleId::ControllerMeans,
        &inputs.researcher_determines_means,
        if inputs.researcher_determines_means {
            "researcher determines essential means"
        } else {
            "means set elsewhere"
        },
    );
    let researcher = inputs.researcher_determines_purposes || inputs.researcher_determines_means;
    let role = match (researcher, inputs.institution_determines_purposes_or_means) {
        (true, true) => ControllershipRole::JointControllers,
        (true, false) => ControllershipRole::ResearcherSoleController,
        (false, _) => ControllershipRole::InstitutionController,
    };
    trace.fire(
        RuleId::ControllerInstitution,
        &inputs.institution_determines_purposes_or_means,
        match role {
            ControllershipRole::JointControllers => "joint controllers: arrangement under Art. 26 needed",
            ControllershipRole::ResearcherSoleController => "researcher is sole controller",
            ControllershipRole::InstitutionController => "institution is controller",
        },
    );
    ControllershipAssessment { role, trace }
}
