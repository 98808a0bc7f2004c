use serde::{Deserialize, Serialize};

use super::{ConditionSpec, ParamType, SkillError, Value};
use crate::ontology::{vocab, Graph, Iri};

/// Key bound to the executing manager's robot element.
pub const ROBOT_KEY: &str = "Robot";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Required,
    Optional,
    Inferred,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::Required => "required",
            Flavor::Optional => "optional",
            Flavor::Inferred => "inferred",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub key: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub flavor: Flavor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
}

impl ParamSpec {
    pub fn new(key: &str, ty: ParamType, flavor: Flavor) -> Self {
        ParamSpec {
            key: key.to_string(),
            ty,
            flavor,
            default: None,
        }
    }

    pub fn element(key: &str, concept: &str, flavor: Flavor) -> Self {
        ParamSpec::new(key, ParamType::ElementOf(Iri::must(concept)), flavor)
    }

    pub fn with_default(mut self, v: Value) -> Self {
        self.default = Some(v);
        self
    }

    pub fn concept(&self) -> Option<&Iri> {
        match &self.ty {
            ParamType::ElementOf(c) => Some(c),
            ParamType::Fundamental(_) => None,
        }
    }
}

/// Semantic contract of a skill: parameters plus pre, hold and post
/// conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillDescription {
    pub name: String,
    #[serde(default, alias = "param")]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub pre: Vec<ConditionSpec>,
    #[serde(default)]
    pub hold: Vec<ConditionSpec>,
    #[serde(default)]
    pub post: Vec<ConditionSpec>,
    /// Whether the task planner may use this skill.
    #[serde(default = "yes")]
    pub planning: bool,
}

fn yes() -> bool {
    true
}

impl SkillDescription {
    pub fn new(name: &str) -> Self {
        SkillDescription {
            name: name.to_string(),
            params: Vec::new(),
            pre: Vec::new(),
            hold: Vec::new(),
            post: Vec::new(),
            planning: true,
        }
    }

    pub fn param(&self, key: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.key == key)
    }

    pub fn conditions(&self) -> impl Iterator<Item = &ConditionSpec> {
        self.pre.iter().chain(&self.hold).chain(&self.post)
    }

    /// True when some condition reads the implicit robot key.
    pub fn references_robot(&self) -> bool {
        self.param(ROBOT_KEY).is_none()
            && self.conditions().any(|c| c.keys().contains(&ROBOT_KEY))
    }

    /// Type of a key, counting the implicit robot key.
    pub fn key_type(&self, key: &str) -> Option<ParamType> {
        match self.param(key) {
            Some(p) => Some(p.ty.clone()),
            None if key == ROBOT_KEY => Some(ParamType::ElementOf(vocab::robot())),
            None => None,
        }
    }

    /// Structural checks: unique keys, inferred params are elements,
    /// conditions only read declared keys, and defaults fit their type.
    pub fn validate(&self) -> Result<(), SkillError> {
        let bad = |msg: String| SkillError::InvalidDescription {
            skill: self.name.clone(),
            message: msg,
        };
        if self.name.is_empty() {
            return Err(bad("empty skill name".into()));
        }
        for (i, p) in self.params.iter().enumerate() {
            if self.params[..i].iter().any(|q| q.key == p.key) {
                return Err(bad(format!("duplicate parameter {}", p.key)));
            }
            if p.flavor == Flavor::Inferred && p.concept().is_none() {
                return Err(bad(format!("inferred parameter {} must be an element", p.key)));
            }
            if let Some(d) = &p.default {
                d.clone()
                    .coerce(&p.ty)
                    .map_err(|e| bad(format!("default of {}: {e}", p.key)))?;
            }
        }
        for c in self.conditions() {
            for k in c.keys() {
                match self.key_type(k) {
                    Some(ParamType::ElementOf(_)) => {}
                    Some(t) => {
                        return Err(bad(format!(
                            "condition {} reads {k}, which is a {t}, not an element",
                            c.name()
                        )))
                    }
                    None => return Err(bad(format!("condition {} reads undeclared key {k}", c.name()))),
                }
            }
        }
        Ok(())
    }

    /// Narrows element params to subconcepts; used by implementations that
    /// handle a single kind of hardware.
    pub fn refined(&self, narrow: &[(String, Iri)]) -> Result<SkillDescription, SkillError> {
        let mut d = self.clone();
        for (key, concept) in narrow {
            let p = d
                .params
                .iter_mut()
                .find(|p| p.key == *key)
                .ok_or_else(|| SkillError::InvalidDescription {
                    skill: self.name.clone(),
                    message: format!("cannot refine unknown parameter {key}"),
                })?;
            p.ty = ParamType::ElementOf(concept.clone());
        }
        Ok(d)
    }
}

/// Whether `imp` is a valid specialization of `base`: same keys and
/// flavors, element concepts equal or narrower, identical fundamental
/// types, and condition lists that contain the base's.
pub fn refines(imp: &SkillDescription, base: &SkillDescription, ontology: &Graph) -> bool {
    if imp.params.len() != base.params.len() {
        return false;
    }
    for b in &base.params {
        let Some(i) = imp.param(&b.key) else {
            return false;
        };
        if i.flavor != b.flavor {
            return false;
        }
        let types_ok = match (&i.ty, &b.ty) {
            (ParamType::ElementOf(ci), ParamType::ElementOf(cb)) => ontology.is_subclass_of(ci, cb),
            (ParamType::Fundamental(fi), ParamType::Fundamental(fb)) => fi == fb,
            _ => false,
        };
        if !types_ok {
            return false;
        }
    }
    let superset = |mine: &[ConditionSpec], theirs: &[ConditionSpec]| theirs.iter().all(|c| mine.contains(c));
    superset(&imp.pre, &base.pre) && superset(&imp.hold, &base.hold) && superset(&imp.post, &base.post)
}
