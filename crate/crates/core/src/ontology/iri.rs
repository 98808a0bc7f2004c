use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IriError {
    #[error("IRI `{0}` is not of the form prefix:local")]
    NotPrefixed(String),
    #[error("IRI prefix `{0}` may only contain ASCII letters, digits and `-`")]
    BadPrefix(String),
    #[error("IRI local name `{0}` must be non-empty and may only contain ASCII letters, digits and `-`")]
    BadLocal(String),
}

/// A prefixed name such as `skiros:Product`.
///
/// The absolute form is obtained by concatenating the base registered for
/// the prefix in a [`Graph`](super::Graph) with the local part. Neither part
/// may contain `_`, which keeps the `:` to `_` mangling used for PDDL
/// identifiers reversible.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iri {
    prefix: String,
    local: String,
}

fn valid_chars(s: &str) -> bool {
    s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl Iri {
    pub fn new(prefix: impl Into<String>, local: impl Into<String>) -> Result<Self, IriError> {
        let prefix = prefix.into();
        let local = local.into();
        if prefix.is_empty() || !valid_chars(&prefix) {
            return Err(IriError::BadPrefix(prefix));
        }
        if local.is_empty() || !valid_chars(&local) {
            return Err(IriError::BadLocal(local));
        }
        Ok(Iri { prefix, local })
    }

    /// Parses `prefix:local`.
    pub fn parse(s: &str) -> Result<Self, IriError> {
        let (prefix, local) = s
            .split_once(':')
            .ok_or_else(|| IriError::NotPrefixed(s.to_string()))?;
        Iri::new(prefix, local)
    }

    /// Parses a literal known to be valid. Panics otherwise; meant for
    /// vocabulary constants and tests.
    pub fn must(s: &str) -> Self {
        Iri::parse(s).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn local(&self) -> &str {
        &self.local
    }

    /// `skiros:objectA` -> `skiros_objectA`.
    pub fn mangled(&self) -> String {
        format!("{}_{}", self.prefix, self.local)
    }

    pub fn unmangle(s: &str) -> Result<Self, IriError> {
        let (prefix, local) = s
            .split_once('_')
            .ok_or_else(|| IriError::NotPrefixed(s.to_string()))?;
        Iri::new(prefix, local)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.prefix, self.local)
    }
}

impl fmt::Debug for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.prefix, self.local)
    }
}

impl FromStr for Iri {
    type Err = IriError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Iri::parse(s)
    }
}

impl Serialize for Iri {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Iri {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Iri::parse(&s).map_err(serde::de::Error::custom)
    }
}
