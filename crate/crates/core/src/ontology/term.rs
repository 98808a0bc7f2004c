use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::Iri;

/// Object position of a triple.
///
/// `Float` is always finite; the constructors in this crate reject NaN and
/// infinities before a term reaches a graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RdfTerm {
    Iri(Iri),
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl RdfTerm {
    fn rank(&self) -> u8 {
        match self {
            RdfTerm::Iri(_) => 0,
            RdfTerm::Str(_) => 1,
            RdfTerm::Int(_) => 2,
            RdfTerm::Float(_) => 3,
            RdfTerm::Bool(_) => 4,
        }
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            RdfTerm::Iri(iri) => Some(iri),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            RdfTerm::Int(v) => Some(*v as f64),
            RdfTerm::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        !matches!(self, RdfTerm::Iri(_))
    }

    /// Finite float literal, or `None` for NaN/infinite input.
    pub fn float(v: f64) -> Option<RdfTerm> {
        v.is_finite().then_some(RdfTerm::Float(v))
    }

    /// Lexical form used in Turtle documents.
    pub fn to_turtle(&self) -> String {
        match self {
            RdfTerm::Iri(iri) => iri.to_string(),
            RdfTerm::Str(s) => quote(s),
            RdfTerm::Int(v) => v.to_string(),
            RdfTerm::Float(v) => format_float(*v),
            RdfTerm::Bool(b) => b.to_string(),
        }
    }
}

/// Shortest round-tripping representation that still reads as a decimal or
/// double (always contains `.` or an exponent).
pub(crate) fn format_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        format!("{s}.0")
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl PartialEq for RdfTerm {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RdfTerm {}

impl PartialOrd for RdfTerm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RdfTerm {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (RdfTerm::Iri(a), RdfTerm::Iri(b)) => a.cmp(b),
            (RdfTerm::Str(a), RdfTerm::Str(b)) => a.cmp(b),
            (RdfTerm::Int(a), RdfTerm::Int(b)) => a.cmp(b),
            (RdfTerm::Float(a), RdfTerm::Float(b)) => a.total_cmp(b),
            (RdfTerm::Bool(a), RdfTerm::Bool(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for RdfTerm {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            RdfTerm::Iri(v) => v.hash(state),
            RdfTerm::Str(v) => v.hash(state),
            RdfTerm::Int(v) => v.hash(state),
            RdfTerm::Float(v) => v.to_bits().hash(state),
            RdfTerm::Bool(v) => v.hash(state),
        }
    }
}

impl fmt::Display for RdfTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RdfTerm::Iri(iri) => write!(f, "{iri}"),
            RdfTerm::Str(s) => write!(f, "{s}"),
            other => f.write_str(&other.to_turtle()),
        }
    }
}

impl From<Iri> for RdfTerm {
    fn from(iri: Iri) -> Self {
        RdfTerm::Iri(iri)
    }
}

impl From<&str> for RdfTerm {
    fn from(s: &str) -> Self {
        RdfTerm::Str(s.to_string())
    }
}

/// A statement. Subjects and predicates are always IRIs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: RdfTerm,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<RdfTerm>) -> Self {
        Triple {
            subject,
            predicate,
            object: object.into(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.subject,
            self.predicate,
            self.object.to_turtle()
        )
    }
}
