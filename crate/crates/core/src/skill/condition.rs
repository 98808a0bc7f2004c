use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SkillError, Value};
use crate::ontology::{Iri, RdfTerm};
use crate::world_model::WmSnapshot;

/// Parameter bindings of one skill invocation.
pub type Bindings = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        })
    }
}

/// A world-state check attached to a skill.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConditionSpec {
    /// `(subject, predicate, object)` is asserted.
    Relation {
        name: String,
        predicate: Iri,
        subject: String,
        object: String,
        #[serde(default = "yes")]
        desired: bool,
    },
    /// Some value of `property` on the element compares true against `value`.
    Property {
        name: String,
        property: Iri,
        param: String,
        op: CmpOp,
        #[serde(with = "plain_literal")]
        value: RdfTerm,
        #[serde(default = "yes")]
        desired: bool,
    },
    /// The element carries `property` at all.
    HasProperty {
        name: String,
        property: Iri,
        param: String,
        #[serde(default = "yes")]
        desired: bool,
    },
    /// The ontology permits `predicate` between the two elements' concepts.
    AbstractRelation {
        name: String,
        predicate: Iri,
        subject: String,
        object: String,
        #[serde(default = "yes")]
        desired: bool,
    },
}

fn yes() -> bool {
    true
}

mod plain_literal {
    use super::RdfTerm;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Plain {
        Bool(bool),
        Int(i64),
        Float(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(t: &RdfTerm, s: S) -> Result<S::Ok, S::Error> {
        match t {
            RdfTerm::Bool(b) => Plain::Bool(*b).serialize(s),
            RdfTerm::Int(i) => Plain::Int(*i).serialize(s),
            RdfTerm::Float(x) => Plain::Float(*x).serialize(s),
            RdfTerm::Str(x) => Plain::Str(x.clone()).serialize(s),
            RdfTerm::Iri(i) => Plain::Str(i.to_string()).serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RdfTerm, D::Error> {
        Ok(match Plain::deserialize(d)? {
            Plain::Bool(b) => RdfTerm::Bool(b),
            Plain::Int(i) => RdfTerm::Int(i),
            Plain::Float(x) => RdfTerm::float(x).ok_or_else(|| D::Error::custom("value must be finite"))?,
            Plain::Str(s) => RdfTerm::Str(s),
        })
    }
}

impl ConditionSpec {
    pub fn name(&self) -> &str {
        match self {
            ConditionSpec::Relation { name, .. }
            | ConditionSpec::Property { name, .. }
            | ConditionSpec::HasProperty { name, .. }
            | ConditionSpec::AbstractRelation { name, .. } => name,
        }
    }

    pub fn desired(&self) -> bool {
        match self {
            ConditionSpec::Relation { desired, .. }
            | ConditionSpec::Property { desired, .. }
            | ConditionSpec::HasProperty { desired, .. }
            | ConditionSpec::AbstractRelation { desired, .. } => *desired,
        }
    }

    /// Parameter keys the condition reads.
    pub fn keys(&self) -> Vec<&str> {
        match self {
            ConditionSpec::Relation { subject, object, .. }
            | ConditionSpec::AbstractRelation { subject, object, .. } => vec![subject, object],
            ConditionSpec::Property { param, .. } | ConditionSpec::HasProperty { param, .. } => {
                vec![param]
            }
        }
    }

    /// Same condition keys renamed through `f` (for remapped subtrees).
    pub fn map_keys(&self, f: impl Fn(&str) -> String) -> ConditionSpec {
        let mut c = self.clone();
        match &mut c {
            ConditionSpec::Relation { subject, object, .. }
            | ConditionSpec::AbstractRelation { subject, object, .. } => {
                *subject = f(subject);
                *object = f(object);
            }
            ConditionSpec::Property { param, .. } | ConditionSpec::HasProperty { param, .. } => {
                *param = f(param);
            }
        }
        c
    }

    pub fn is_bound(&self, b: &Bindings) -> bool {
        self.keys().iter().all(|k| b.contains_key(*k))
    }

    /// Evaluates the condition. Unbound keys and keys bound to non-elements
    /// are errors rather than `false`.
    pub fn evaluate(&self, b: &Bindings, wm: &WmSnapshot) -> Result<bool, SkillError> {
        let holds = match self {
            ConditionSpec::Relation {
                predicate,
                subject,
                object,
                ..
            } => {
                let s = element(b, subject)?;
                let o = element(b, object)?;
                wm.has_relation(s, predicate, o)
            }
            ConditionSpec::Property {
                property,
                param,
                op,
                value,
                ..
            } => {
                let e = element(b, param)?;
                let mut any = false;
                for v in wm.values(e, property) {
                    if compare(&v, *op, value)? {
                        any = true;
                        break;
                    }
                }
                any
            }
            ConditionSpec::HasProperty { property, param, .. } => {
                let e = element(b, param)?;
                wm.graph().objects(e, property).next().is_some()
            }
            ConditionSpec::AbstractRelation {
                predicate,
                subject,
                object,
                ..
            } => {
                let s = element(b, subject)?;
                let o = element(b, object)?;
                match (wm.element_type(s), wm.element_type(o)) {
                    (Some(ts), Some(to)) => permitted(wm, &ts, predicate, &to),
                    _ => false,
                }
            }
        };
        Ok(holds == self.desired())
    }
}

fn element<'a>(b: &'a Bindings, key: &str) -> Result<&'a Iri, SkillError> {
    match b.get(key) {
        None => Err(SkillError::UnboundParameter(key.to_string())),
        Some(Value::Element(i)) => Ok(i),
        Some(other) => Err(SkillError::NotAnElement {
            key: key.to_string(),
            value: other.to_string(),
        }),
    }
}

/// Whether the ontology holds `(A, predicate, B)` with `subject ⊑ A` and
/// `object ⊑ B`.
pub fn permitted(wm: &WmSnapshot, subject: &Iri, predicate: &Iri, object: &Iri) -> bool {
    let g = wm.graph();
    g.with_predicate(predicate).any(|(a, b)| {
        g.is_concept(a)
            && b.as_iri()
                .is_some_and(|b| g.is_concept(b) && g.is_subclass_of(subject, a) && g.is_subclass_of(object, b))
    })
}

pub(crate) fn compare(actual: &RdfTerm, op: CmpOp, expected: &RdfTerm) -> Result<bool, SkillError> {
    let numeric = actual.as_f64().zip(expected.as_f64());
    match op {
        CmpOp::Eq | CmpOp::Ne => {
            let eq = match numeric {
                Some((a, e)) => a == e,
                None => actual == expected,
            };
            Ok(eq == (op == CmpOp::Eq))
        }
        CmpOp::Lt | CmpOp::Gt => {
            let (a, e) = numeric.ok_or_else(|| {
                SkillError::TypeMismatch(format!(
                    "{} {op} {} needs numeric operands",
                    actual.to_turtle(),
                    expected.to_turtle()
                ))
            })?;
            Ok(if op == CmpOp::Lt { a < e } else { a > e })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{base_ontology, vocab};
    use crate::world_model::{NewElement, WorldModel};

    fn empty_handed(desired: bool) -> ConditionSpec {
        ConditionSpec::Property {
            name: "EmptyHanded".into(),
            property: vocab::container_state(),
            param: "Gripper".into(),
            op: CmpOp::Eq,
            value: RdfTerm::Str("Empty".into()),
            desired,
        }
    }

    fn scene() -> (WmSnapshot, Bindings) {
        let mut m = WorldModel::new(base_ontology()).unwrap();
        let g = m
            .add_element(
                NewElement::of_type(Iri::must("scalable:RobotiqGripper"))
                    .property(vocab::container_state(), "Empty"),
            )
            .unwrap();
        let mut b = Bindings::new();
        b.insert("Gripper".into(), Value::Element(g));
        (m.snapshot(), b)
    }

    #[test]
    fn property_value_and_negation() {
        let (wm, b) = scene();
        assert_eq!(empty_handed(true).evaluate(&b, &wm), Ok(true));
        assert_eq!(empty_handed(false).evaluate(&b, &wm), Ok(false));
    }

    #[test]
    fn unbound_and_non_element_are_errors() {
        let (wm, _) = scene();
        assert_eq!(
            empty_handed(true).evaluate(&Bindings::new(), &wm),
            Err(SkillError::UnboundParameter("Gripper".into()))
        );
        let mut b = Bindings::new();
        b.insert("Gripper".into(), Value::Float(1.0));
        assert!(matches!(empty_handed(true).evaluate(&b, &wm), Err(SkillError::NotAnElement { .. })));
    }

    #[test]
    fn ordering_on_strings_is_a_type_mismatch() {
        let (wm, b) = scene();
        let c = ConditionSpec::Property {
            name: "Bad".into(),
            property: vocab::container_state(),
            param: "Gripper".into(),
            op: CmpOp::Lt,
            value: RdfTerm::Str("Empty".into()),
            desired: true,
        };
        assert!(matches!(c.evaluate(&b, &wm), Err(SkillError::TypeMismatch(_))));
    }

    #[test]
    fn abstract_relation_uses_permission_triples() {
        let mut m = WorldModel::new(base_ontology()).unwrap();
        let loc = m.add_element(NewElement::of_type(Iri::must("skiros:Workstation"))).unwrap();
        let obj = m.add_element(NewElement::of_type(vocab::product())).unwrap();
        let mut b = Bindings::new();
        b.insert("L".into(), Value::Element(loc));
        b.insert("O".into(), Value::Element(obj));
        let c = |s: &str, o: &str| ConditionSpec::AbstractRelation {
            name: "CanContain".into(),
            predicate: vocab::contain(),
            subject: s.into(),
            object: o.into(),
            desired: true,
        };
        let wm = m.snapshot();
        assert_eq!(c("L", "O").evaluate(&b, &wm), Ok(true));
        assert_eq!(c("O", "L").evaluate(&b, &wm), Ok(false));
    }

    #[test]
    fn toml_form() {
        #[derive(Deserialize)]
        struct W {
            c: Vec<ConditionSpec>,
        }
        let w: W = toml::from_str(
            r#"
            [[c]]
            type = "property"
            name = "EmptyHanded"
            property = "skiros:ContainerState"
            param = "Gripper"
            op = "="
            value = "Empty"
            [[c]]
            type = "relation"
            name = "Holding"
            predicate = "skiros:contain"
            subject = "Gripper"
            object = "Object"
            desired = false
            "#,
        )
        .unwrap();
        assert_eq!(w.c[0], empty_handed(true));
        assert!(!w.c[1].desired());
    }
}
