//! Behavior tree engine: processors, skill leaves with condition checks,
//! primitive life-cycle and preemption.

mod expand;
mod node;
mod primitive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skill::SkillError;

pub use expand::{instantiate_skill, instantiate_tree, select_implementation, MAX_DEPTH};
pub use node::{Action, BtNode, NodeDump, TickCtx, TranscriptEntry};
pub use primitive::{Catalog, ExecCtx, Factory, Primitive, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Processor {
    Sequential,
    Selector,
    ParallelFirstFail,
    ParallelFirstSuccess,
}

impl Processor {
    pub fn name(self) -> &'static str {
        match self {
            Processor::Sequential => "sequential",
            Processor::Selector => "selector",
            Processor::ParallelFirstFail => "parallel_first_fail",
            Processor::ParallelFirstSuccess => "parallel_first_success",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Success,
    Failure,
    Running,
}

/// Why a node ended the way it did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Diagnostic {
    PreconditionViolated(String),
    HoldViolated(String),
    PostconditionViolated(String),
    Preempted,
    Failed(String),
    Error(String),
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::PreconditionViolated(c) => write!(f, "precondition {c} violated"),
            Diagnostic::HoldViolated(c) => write!(f, "hold condition {c} violated"),
            Diagnostic::PostconditionViolated(c) => write!(f, "postcondition {c} violated"),
            Diagnostic::Preempted => write!(f, "preempted"),
            Diagnostic::Failed(m) => write!(f, "failed: {m}"),
            Diagnostic::Error(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Hold,
    Post,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Hold => "hold",
            Phase::Post => "post",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BtError {
    #[error("unknown skill {0}")]
    UnknownSkill(String),
    #[error("no implementation of {skill}: {reason}")]
    NoImplementation { skill: String, reason: String },
    #[error("unknown primitive factory {0}")]
    UnknownFactory(String),
    #[error("tree expansion deeper than {0} levels")]
    ExpansionDepth(usize),
    #[error(transparent)]
    Skill(#[from] SkillError),
}
