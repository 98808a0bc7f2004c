//! Skill descriptions, condition evaluation, parameter inference and the
//! task blackboard.

mod blackboard;
pub(crate) mod condition;
mod description;
mod infer;
mod manifest;
mod value;

use thiserror::Error;

pub use blackboard::{resolve_key, Blackboard, Overlay, Scope};
pub use condition::{permitted, Bindings, CmpOp, ConditionSpec};
pub use description::{refines, Flavor, ParamSpec, SkillDescription, ROBOT_KEY};
pub use infer::{complete_bindings, infer_parameters, Rejection};
pub use manifest::{
    parse_manifest, CompoundDecl, ImplBody, Implementation, PrimitiveDecl, Registry, SkillLibrary,
    TreeSpec,
};
pub use value::{Fundamental, ParamType, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkillError {
    #[error("parameter {0} is not bound")]
    UnboundParameter(String),
    #[error("parameter {key} is bound to {value}, not an element")]
    NotAnElement { key: String, value: String },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("required parameter {0} is missing")]
    MissingRequired(String),
    #[error("invalid parameter {key}: {message}")]
    InvalidParameter { key: String, message: String },
    #[error("no consistent assignment for {skill}: {}", .rejections.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; "))]
    NoConsistentAssignment { skill: String, rejections: Vec<Rejection> },
    #[error("invalid description {skill}: {message}")]
    InvalidDescription { skill: String, message: String },
    #[error("unknown skill {0}")]
    UnknownSkill(String),
    #[error("no implementation of {skill}: {reason}")]
    NoImplementation { skill: String, reason: String },
    #[error("duplicate skill name {0}")]
    DuplicateSkillName(String),
    #[error("manifest: {0}")]
    Manifest(String),
}
