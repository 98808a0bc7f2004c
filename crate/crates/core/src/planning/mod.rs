//! Compiles skill descriptions and a world-model snapshot into a typed
//! STRIPS domain and problem, solves them optimally and turns plans back
//! into executable trees.

mod domain;
mod pddl;
mod plan;
mod problem;
mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{Iri, RdfTerm};

pub use domain::{generate_domain, Exclusion};
pub use pddl::{emit_domain, emit_problem, parse_domain, parse_problem};
pub use plan::{parse_plan, plan_to_ebt, validate_plan, PlanViolation};
pub use problem::{generate_problem, parse_goal, GoalLiteral};
pub use search::{plan, plan_with_limit, DEFAULT_STATE_LIMIT};

/// Predicate applied to variables (in actions) or object IRIs (in
/// problems).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(pred: &str, args: &[&str]) -> Self {
        Atom {
            pred: pred.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.pred, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { positive: false, atom }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "not {}", self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedVar {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: Iri,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanningAction {
    pub name: String,
    pub params: Vec<TypedVar>,
    pub pre: BTreeSet<Literal>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
}

impl PlanningAction {
    pub fn param(&self, name: &str) -> Option<&TypedVar> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// What a compiled predicate reads in the world model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredSource {
    Relation { predicate: Iri },
    PropertyValue { property: Iri, value: RdfTerm },
    PropertyPresent { property: Iri },
}

/// The part of a domain that PDDL text carries.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    /// Type to its parent; roots map to `None`.
    pub types: BTreeMap<Iri, Option<Iri>>,
    /// Argument types per predicate; `None` is the PDDL `object` type.
    pub predicates: BTreeMap<String, Vec<Option<Iri>>>,
    pub actions: Vec<PlanningAction>,
}

impl Domain {
    pub fn action(&self, name: &str) -> Option<&PlanningAction> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Whether `sub` equals `sup` or descends from it in the type tree.
    pub fn is_subtype(&self, sub: &Iri, sup: &Iri) -> bool {
        let mut cur = Some(sub);
        let mut guard = 0;
        while let Some(t) = cur {
            if t == sup {
                return true;
            }
            guard += 1;
            if guard > self.types.len() + 1 {
                return false;
            }
            cur = self.types.get(t).and_then(Option::as_ref);
        }
        false
    }
}

/// A compiled domain plus the bookkeeping needed to talk to the world
/// model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanningDomain {
    pub domain: Domain,
    pub sources: BTreeMap<String, PredSource>,
    /// Index of the first required parameter per action, used for short
    /// step summaries.
    pub headlines: BTreeMap<String, usize>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    /// Object to its most specific type.
    pub objects: BTreeMap<Iri, Iri>,
    pub init: BTreeSet<Atom>,
    pub goal: BTreeSet<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: String,
    pub args: Vec<Iri>,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.action)?;
        for a in &self.args {
            write!(f, " {}", a.mangled())?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

impl PlanningDomain {
    /// `drive(workstationA)` style summary naming the headline argument.
    pub fn summary(&self, step: &PlanStep) -> String {
        match self.headlines.get(&step.action).and_then(|i| step.args.get(*i)) {
            Some(a) => format!("{}({})", step.action, a.local()),
            None => step.action.clone(),
        }
    }

    /// Plan arguments keyed by the parameter names of the action.
    pub fn step_bindings(&self, step: &PlanStep) -> Result<BTreeMap<String, Iri>, PlanError> {
        let a = self
            .domain
            .action(&step.action)
            .ok_or_else(|| PlanError::UnknownAction(step.action.clone()))?;
        if a.params.len() != step.args.len() {
            return Err(PlanError::Arity {
                action: step.action.clone(),
                expected: a.params.len(),
                found: step.args.len(),
            });
        }
        Ok(a.params
            .iter()
            .zip(&step.args)
            .map(|(p, v)| (p.name.clone(), v.clone()))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("{action} takes {expected} arguments, got {found}")]
    Arity { action: String, expected: usize, found: usize },
    #[error("no plan reaches the goal")]
    NoPlan,
    #[error("search expanded more than {0} states")]
    ResourceLimit(usize),
    #[error("syntax error on line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("mangled name {0} is ambiguous")]
    MangleCollision(String),
    #[error("goal is empty")]
    EmptyGoal,
}
