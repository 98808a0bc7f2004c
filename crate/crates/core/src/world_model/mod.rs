//! Element-level view over the triple store.
//!
//! A [`WorldModel`] owns the graph and is the only mutation path. Every
//! committed operation bumps the version by one and records a
//! [`ChangeEvent`] carrying the exact triple delta, so any past version can
//! be rebuilt by replay. [`WmServer`] wraps a model behind a mutex for shared
//! use and fans events out to subscribers.

mod element;
mod model;
mod pose;
mod server;
mod snapshot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{GraphError, Iri, Triple, TurtleError};

pub use element::{Element, ElementPatch, NewElement, Relation};
pub use model::{replay, WorldModel, HISTORY_HORIZON};
pub use pose::{Pose, PoseError};
pub use server::{Subscription, WmServer};
pub use snapshot::WmSnapshot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WmError {
    #[error("unknown concept {0}")]
    UnknownConcept(Iri),
    #[error("unknown element {0}")]
    UnknownElement(Iri),
    #[error("element {0} already exists")]
    DuplicateElement(Iri),
    #[error("moving {element} under {parent} would create a containment cycle")]
    CycleDetected { element: Iri, parent: Iri },
    #[error("element {0} still contains children")]
    ElementHasChildren(Iri),
    #[error("invalid value: {0}")]
    InvalidLiteral(String),
    #[error("predicate {0} is managed by the world model")]
    ReservedPredicate(Iri),
    #[error("the scene root cannot be moved or removed")]
    RootImmutable,
    #[error("version {requested} is older than the retained history (oldest {oldest})")]
    VersionTooOld { requested: u64, oldest: u64 },
    #[error("version {requested} is ahead of the current version {current}")]
    FutureVersion { requested: u64, current: u64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Turtle(#[from] TurtleError),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChangeKind {
    ElementAdded,
    ElementUpdated,
    ElementRemoved,
    RelationSet,
    RelationCleared,
    SceneLoaded,
}

/// One triple-level step of a commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TripleDelta {
    Added(Triple),
    Removed(Triple),
    Prefix { name: String, base: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub version: u64,
    pub kind: ChangeKind,
    pub subject: Iri,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<Iri>,
    /// Applied in order, these steps turn version `version - 1` into `version`.
    pub delta: Vec<TripleDelta>,
}
