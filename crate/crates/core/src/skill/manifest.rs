use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{refines, ConditionSpec, Overlay, ParamType, SkillDescription, SkillError, Value, ROBOT_KEY};
use crate::bt::Processor;
use crate::ontology::{Graph, Iri};

/// Node of a compound skill's tree as written in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeSpec {
    Processor {
        processor: Processor,
        #[serde(default)]
        children: Vec<TreeSpec>,
    },
    Skill {
        skill: String,
        /// Pins a specific implementation instead of runtime selection.
        #[serde(default, rename = "impl", skip_serializing_if = "Option::is_none")]
        implementation: Option<String>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        specify: BTreeMap<String, Value>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        remap: BTreeMap<String, String>,
    },
}

impl TreeSpec {
    pub fn overlay(&self) -> Overlay {
        match self {
            TreeSpec::Skill { specify, remap, .. } => Overlay {
                specify: specify.clone(),
                remap: remap.clone(),
            },
            TreeSpec::Processor { .. } => Overlay::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveDecl {
    pub name: String,
    pub implements: String,
    /// Name of the registered primitive factory.
    pub factory: String,
    #[serde(default)]
    pub refine: BTreeMap<String, Iri>,
    #[serde(default)]
    pub pre: Vec<ConditionSpec>,
    #[serde(default)]
    pub hold: Vec<ConditionSpec>,
    #[serde(default)]
    pub post: Vec<ConditionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundDecl {
    pub name: String,
    pub implements: String,
    #[serde(default)]
    pub refine: BTreeMap<String, Iri>,
    #[serde(default)]
    pub pre: Vec<ConditionSpec>,
    #[serde(default)]
    pub hold: Vec<ConditionSpec>,
    #[serde(default)]
    pub post: Vec<ConditionSpec>,
    pub tree: TreeSpec,
}

/// One skill library manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillLibrary {
    #[serde(default, rename = "skill")]
    pub skills: Vec<SkillDescription>,
    #[serde(default, rename = "primitive")]
    pub primitives: Vec<PrimitiveDecl>,
    #[serde(default, rename = "compound")]
    pub compounds: Vec<CompoundDecl>,
}

pub fn parse_manifest(text: &str) -> Result<SkillLibrary, SkillError> {
    toml::from_str(text).map_err(|e| SkillError::Manifest(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImplBody {
    Primitive { factory: String },
    Compound { tree: TreeSpec },
}

/// A concrete way to execute a description, with its refined contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Implementation {
    pub name: String,
    pub implements: String,
    pub description: SkillDescription,
    pub body: ImplBody,
}

/// Every loaded description and implementation, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Registry {
    descriptions: BTreeMap<String, SkillDescription>,
    implementations: BTreeMap<String, Implementation>,
}

struct Extra<'a> {
    refine: &'a BTreeMap<String, Iri>,
    pre: &'a [ConditionSpec],
    hold: &'a [ConditionSpec],
    post: &'a [ConditionSpec],
}

impl Registry {
    /// Loads libraries in order, checking names, refinements and compound
    /// trees against the ontology.
    pub fn build(libraries: &[SkillLibrary], ontology: &Graph) -> Result<Registry, SkillError> {
        let mut r = Registry::default();
        for lib in libraries {
            for d in &lib.skills {
                d.validate()?;
                for p in &d.params {
                    if let ParamType::ElementOf(c) = &p.ty {
                        if !ontology.is_concept(c) {
                            return Err(SkillError::InvalidDescription {
                                skill: d.name.clone(),
                                message: format!("parameter {} has unknown concept {c}", p.key),
                            });
                        }
                    }
                }
                if r.descriptions.insert(d.name.clone(), d.clone()).is_some() {
                    return Err(SkillError::DuplicateSkillName(d.name.clone()));
                }
            }
        }
        for lib in libraries {
            for p in &lib.primitives {
                let extra = Extra {
                    refine: &p.refine,
                    pre: &p.pre,
                    hold: &p.hold,
                    post: &p.post,
                };
                let body = ImplBody::Primitive {
                    factory: p.factory.clone(),
                };
                r.add_implementation(&p.name, &p.implements, extra, body, ontology)?;
            }
            for c in &lib.compounds {
                let extra = Extra {
                    refine: &c.refine,
                    pre: &c.pre,
                    hold: &c.hold,
                    post: &c.post,
                };
                let body = ImplBody::Compound { tree: c.tree.clone() };
                r.add_implementation(&c.name, &c.implements, extra, body, ontology)?;
            }
        }
        let compounds: Vec<(String, TreeSpec, SkillDescription)> = r
            .implementations
            .values()
            .filter_map(|i| match &i.body {
                ImplBody::Compound { tree } => Some((i.name.clone(), tree.clone(), i.description.clone())),
                ImplBody::Primitive { .. } => None,
            })
            .collect();
        for (name, tree, desc) in compounds {
            let coerced = r.check_tree(&name, &tree, &desc)?;
            if let Some(i) = r.implementations.get_mut(&name) {
                i.body = ImplBody::Compound { tree: coerced };
            }
        }
        Ok(r)
    }

    fn add_implementation(
        &mut self,
        name: &str,
        implements: &str,
        extra: Extra<'_>,
        body: ImplBody,
        ontology: &Graph,
    ) -> Result<(), SkillError> {
        let base = self
            .descriptions
            .get(implements)
            .ok_or_else(|| SkillError::UnknownSkill(implements.to_string()))?;
        let narrow: Vec<(String, Iri)> = extra.refine.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut d = base.refined(&narrow)?;
        d.pre.extend(extra.pre.iter().cloned());
        d.hold.extend(extra.hold.iter().cloned());
        d.post.extend(extra.post.iter().cloned());
        d.validate()?;
        if !refines(&d, base, ontology) {
            return Err(SkillError::InvalidDescription {
                skill: name.to_string(),
                message: format!("does not refine {implements}"),
            });
        }
        if self.descriptions.contains_key(name) || self.implementations.contains_key(name) {
            return Err(SkillError::DuplicateSkillName(name.to_string()));
        }
        self.implementations.insert(
            name.to_string(),
            Implementation {
                name: name.to_string(),
                implements: implements.to_string(),
                description: d,
                body,
            },
        );
        Ok(())
    }

    /// Validates a compound tree and returns it with specified constants
    /// coerced to the child parameter types.
    fn check_tree(&self, owner: &str, t: &TreeSpec, scope: &SkillDescription) -> Result<TreeSpec, SkillError> {
        let bad = |m: String| SkillError::InvalidDescription {
            skill: owner.to_string(),
            message: m,
        };
        match t {
            TreeSpec::Processor { processor, children } => Ok(TreeSpec::Processor {
                processor: *processor,
                children: children
                    .iter()
                    .map(|c| self.check_tree(owner, c, scope))
                    .collect::<Result<_, _>>()?,
            }),
            TreeSpec::Skill {
                skill,
                implementation,
                specify,
                remap,
            } => {
                let child = self
                    .descriptions
                    .get(skill)
                    .ok_or_else(|| bad(format!("child skill {skill} is unknown")))?;
                if let Some(i) = implementation {
                    match self.implementations.get(i) {
                        Some(imp) if imp.implements == *skill => {}
                        _ => return Err(bad(format!("{i} is not an implementation of {skill}"))),
                    }
                }
                let mut coerced = BTreeMap::new();
                for (k, v) in specify {
                    let ty = child
                        .key_type(k)
                        .ok_or_else(|| bad(format!("{skill} has no parameter {k} to specify")))?;
                    let v = v.clone().coerce(&ty).map_err(|e| bad(format!("specify {skill}.{k}: {e}")))?;
                    coerced.insert(k.clone(), v);
                }
                for (k, target) in remap {
                    if child.key_type(k).is_none() {
                        return Err(bad(format!("{skill} has no parameter {k} to remap")));
                    }
                    if scope.key_type(target).is_none() {
                        return Err(bad(format!("remap target {target} is not a parameter of {owner}")));
                    }
                }
                for p in &child.params {
                    if p.flavor != super::Flavor::Required {
                        continue;
                    }
                    let visible = coerced.contains_key(&p.key)
                        || remap.contains_key(&p.key)
                        || scope.key_type(&p.key).is_some();
                    if !visible {
                        return Err(bad(format!("required {skill}.{} is never bound", p.key)));
                    }
                }
                Ok(TreeSpec::Skill {
                    skill: skill.clone(),
                    implementation: implementation.clone(),
                    specify: coerced,
                    remap: remap.clone(),
                })
            }
        }
    }

    pub fn description(&self, name: &str) -> Option<&SkillDescription> {
        self.descriptions.get(name)
    }

    pub fn descriptions(&self) -> impl Iterator<Item = &SkillDescription> {
        self.descriptions.values()
    }

    pub fn implementation(&self, name: &str) -> Option<&Implementation> {
        self.implementations.get(name)
    }

    pub fn implementations(&self) -> impl Iterator<Item = &Implementation> {
        self.implementations.values()
    }

    /// Implementations of a description, in name order.
    pub fn implementations_of<'a>(&'a self, skill: &str) -> impl Iterator<Item = &'a Implementation> + use<'a> {
        let skill = skill.to_string();
        self.implementations.values().filter(move |i| i.implements == skill)
    }

    /// Drops an implementation, and its description once nothing else
    /// implements it.
    pub fn remove_implementation(&mut self, name: &str) {
        if let Some(i) = self.implementations.remove(name) {
            if self.implementations_of(&i.implements).next().is_none() {
                self.descriptions.remove(&i.implements);
            }
        }
    }

    /// Copy restricted to descriptions accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&SkillDescription) -> bool) -> Registry {
        let descriptions: BTreeMap<_, _> = self
            .descriptions
            .iter()
            .filter(|(_, d)| keep(d))
            .map(|(k, d)| (k.clone(), d.clone()))
            .collect();
        let implementations = self
            .implementations
            .iter()
            .filter(|(_, i)| descriptions.contains_key(&i.implements))
            .map(|(k, i)| (k.clone(), i.clone()))
            .collect();
        Registry {
            descriptions,
            implementations,
        }
    }

    /// Whether the key is visible to `skill`: a declared param or the
    /// implicit robot key.
    pub fn has_key(&self, skill: &str, key: &str) -> bool {
        self.descriptions
            .get(skill)
            .is_some_and(|d| d.param(key).is_some() || key == ROBOT_KEY)
    }
}
