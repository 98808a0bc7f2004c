use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ontology::{Iri, RdfTerm};

/// A parameter value on the blackboard.
///
/// The wire form is untagged: element references travel as `"prefix:local"`
/// strings and are recovered by [`Value::coerce`] against the declared type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Element(Iri),
    Str(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

/// Fundamental parameter types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fundamental {
    String,
    Int,
    Float,
    Bool,
    List,
    Map,
}

/// Declared type of a parameter: a fundamental type or an element of a concept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamType {
    Fundamental(Fundamental),
    ElementOf(Iri),
}

impl Fundamental {
    pub fn name(self) -> &'static str {
        match self {
            Fundamental::String => "string",
            Fundamental::Int => "int",
            Fundamental::Float => "float",
            Fundamental::Bool => "bool",
            Fundamental::List => "list",
            Fundamental::Map => "map",
        }
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamType::Fundamental(t) => f.write_str(t.name()),
            ParamType::ElementOf(c) => write!(f, "{c}"),
        }
    }
}

impl std::str::FromStr for ParamType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = match s {
            "string" | "str" => Fundamental::String,
            "int" => Fundamental::Int,
            "float" => Fundamental::Float,
            "bool" => Fundamental::Bool,
            "list" => Fundamental::List,
            "map" | "dict" => Fundamental::Map,
            other => {
                return Iri::parse(other)
                    .map(ParamType::ElementOf)
                    .map_err(|e| format!("unknown parameter type {other:?}: {e}"))
            }
        };
        Ok(ParamType::Fundamental(t))
    }
}

impl Serialize for ParamType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParamType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Element(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(_) | Value::Map(_) => {
                f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
            }
        }
    }
}

impl Value {
    pub fn as_element(&self) -> Option<&Iri> {
        match self {
            Value::Element(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Converts a loosely typed value (as parsed from JSON or TOML) to the
    /// declared type. Ints widen to floats; strings parse as element IRIs.
    pub fn coerce(self, ty: &ParamType) -> Result<Value, String> {
        use Fundamental as F;
        match (ty, self) {
            (ParamType::ElementOf(_), Value::Element(i)) => Ok(Value::Element(i)),
            (ParamType::ElementOf(_), Value::Str(s)) => Iri::parse(&s)
                .map(Value::Element)
                .map_err(|e| format!("{s:?} is not an element id: {e}")),
            (ParamType::Fundamental(F::String), Value::Str(s)) => Ok(Value::Str(s)),
            (ParamType::Fundamental(F::String), Value::Element(i)) => Ok(Value::Str(i.to_string())),
            (ParamType::Fundamental(F::Int), Value::Int(i)) => Ok(Value::Int(i)),
            (ParamType::Fundamental(F::Float), Value::Float(x)) => Ok(Value::Float(x)),
            (ParamType::Fundamental(F::Float), Value::Int(i)) => Ok(Value::Float(i as f64)),
            (ParamType::Fundamental(F::Bool), Value::Bool(b)) => Ok(Value::Bool(b)),
            (ParamType::Fundamental(F::List), Value::List(v)) => Ok(Value::List(v)),
            (ParamType::Fundamental(F::Map), Value::Map(m)) => Ok(Value::Map(m)),
            (ty, v) => Err(format!("expected {ty}, got {v}")),
        }
    }

    /// Parses command-line text such as `Duration=1.5` values.
    pub fn parse_text(ty: &ParamType, text: &str) -> Result<Value, String> {
        use Fundamental as F;
        let bad = |e: &dyn fmt::Display| format!("{text:?} is not a valid {ty}: {e}");
        match ty {
            ParamType::ElementOf(_) => Iri::parse(text).map(Value::Element).map_err(|e| bad(&e)),
            ParamType::Fundamental(F::String) => Ok(Value::Str(text.to_string())),
            ParamType::Fundamental(F::Int) => text.parse().map(Value::Int).map_err(|e| bad(&e)),
            ParamType::Fundamental(F::Float) => {
                let x: f64 = text.parse().map_err(|e| bad(&e))?;
                if x.is_finite() {
                    Ok(Value::Float(x))
                } else {
                    Err(bad(&"not finite"))
                }
            }
            ParamType::Fundamental(F::Bool) => text.parse().map(Value::Bool).map_err(|e| bad(&e)),
            ParamType::Fundamental(F::List | F::Map) => serde_json::from_str::<Value>(text)
                .map_err(|e| bad(&e))
                .and_then(|v| v.coerce(ty)),
        }
    }

    /// The world-model literal or IRI this value denotes, if any.
    pub fn to_term(&self) -> Option<RdfTerm> {
        match self {
            Value::Bool(b) => Some(RdfTerm::Bool(*b)),
            Value::Int(i) => Some(RdfTerm::Int(*i)),
            Value::Float(x) => RdfTerm::float(*x),
            Value::Element(i) => Some(RdfTerm::Iri(i.clone())),
            Value::Str(s) => Some(RdfTerm::Str(s.clone())),
            Value::List(_) | Value::Map(_) => None,
        }
    }
}

impl From<Iri> for Value {
    fn from(i: Iri) -> Self {
        Value::Element(i)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}
