//! Interactive questionnaire over the decision trees.
//!
//! Every node is a manifest rule and every endpoint is a library decision
//! over the facts the answers set, so a questionnaire run and a CLI
//! assessment of the same facts agree verdict for verdict.

mod service;
mod trees;

use thiserror::Error;

use crate::ledger::LedgerError;
use crate::policy::{PolicyError, Tree};

pub use service::{
    default_inputs, AnswerRequest, AnswerResponse, CaseService, CaseView, CreateCaseRequest, DpiaUpdateRequest, DpiaView,
    Endpoint, PathStep, TreeState, WhatIfRequest, WhatIfResponse, WhatIfTree,
};
pub use trees::{node_choices, tree_views, validate_choice, NodeView, OptionView, RuleView, TreeView};

#[derive(Debug, Error)]
pub enum QuestionnaireError {
    #[error("no case {0}")]
    CaseNotFound(String),
    #[error("case {0} already exists")]
    CaseExists(String),
    #[error("unknown tree {0:?}")]
    UnknownTree(String),
    #[error("unknown node {node:?}{}", tree.map(|t| format!(" in tree {}", t.as_str())).unwrap_or_default())]
    UnknownNode { tree: Option<Tree>, node: String },
    #[error("{choice:?} is not an option at {node}")]
    InvalidChoice { node: String, choice: String },
    #[error("{node} is not reachable in {} with the current answers", tree.as_str())]
    NodeNotReachable { tree: Tree, node: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl QuestionnaireError {
    pub fn code(&self) -> &'static str {
        match self {
            QuestionnaireError::CaseNotFound(_) => "case_not_found",
            QuestionnaireError::CaseExists(_) => "case_exists",
            QuestionnaireError::UnknownTree(_) => "unknown_tree",
            QuestionnaireError::UnknownNode { .. } => "unknown_node",
            QuestionnaireError::InvalidChoice { .. } => "invalid_choice",
            QuestionnaireError::NodeNotReachable { .. } => "node_not_reachable",
            QuestionnaireError::Ledger(e) => e.code(),
            QuestionnaireError::Policy(e) => e.code(),
        }
    }
}
