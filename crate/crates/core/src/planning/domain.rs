use std::collections::{BTreeMap, BTreeSet};

use log::info;
use serde::{Deserialize, Serialize};

use super::{Atom, Domain, Literal, PlanningAction, PlanningDomain, PredSource, TypedVar};
use crate::ontology::{vocab, Graph, Iri, RdfTerm};
use crate::skill::{CmpOp, ConditionSpec, Flavor, Registry, SkillDescription, ROBOT_KEY};
use crate::world_model::WmSnapshot;

/// A description left out of the domain, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub skill: String,
    pub reason: String,
}

fn value_token(v: &RdfTerm) -> String {
    let raw = match v {
        RdfTerm::Iri(i) => i.local().to_string(),
        RdfTerm::Str(s) => s.clone(),
        RdfTerm::Int(i) => i.to_string(),
        RdfTerm::Float(f) => f.to_string(),
        RdfTerm::Bool(b) => b.to_string(),
    };
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '-' })
        .collect()
}

/// Predicate name and source for a condition, or the reason it cannot be
/// planned with.
fn compile_condition(c: &ConditionSpec) -> Result<(String, PredSource, Vec<String>), String> {
    match c {
        ConditionSpec::Relation {
            predicate, subject, object, ..
        } => Ok((
            predicate.mangled(),
            PredSource::Relation {
                predicate: predicate.clone(),
            },
            vec![subject.clone(), object.clone()],
        )),
        ConditionSpec::Property {
            property,
            param,
            op,
            value,
            name,
            ..
        } => {
            if *op != CmpOp::Eq {
                return Err(format!("condition {name} compares with {op}"));
            }
            Ok((
                format!("{}_{}", property.local(), value_token(value)),
                PredSource::PropertyValue {
                    property: property.clone(),
                    value: value.clone(),
                },
                vec![param.clone()],
            ))
        }
        ConditionSpec::HasProperty { property, param, .. } => Ok((
            format!("{}_present", property.local()),
            PredSource::PropertyPresent {
                property: property.clone(),
            },
            vec![param.clone()],
        )),
        ConditionSpec::AbstractRelation { name, .. } => Err(format!("condition {name} is an abstract relation")),
    }
}

struct Compiled {
    action: PlanningAction,
    headline: Option<usize>,
    preds: Vec<(String, PredSource)>,
}

fn compile(d: &SkillDescription) -> Result<Compiled, String> {
    let mut params = Vec::new();
    let mut headline = None;
    for p in &d.params {
        match p.concept() {
            Some(c) => {
                if headline.is_none() && p.flavor == Flavor::Required {
                    headline = Some(params.len());
                }
                params.push(TypedVar {
                    name: p.key.clone(),
                    ty: c.clone(),
                });
            }
            None if p.flavor == Flavor::Required && p.default.is_none() => {
                return Err(format!("required parameter {} is not an element", p.key));
            }
            None => {}
        }
    }
    if d.references_robot() {
        params.push(TypedVar {
            name: ROBOT_KEY.to_string(),
            ty: vocab::robot(),
        });
    }
    let mut preds = Vec::new();
    let mut lit = |c: &ConditionSpec| -> Result<(bool, Atom), String> {
        let (name, src, args) = compile_condition(c)?;
        preds.push((name.clone(), src));
        Ok((c.desired(), Atom { pred: name, args }))
    };
    let mut pre = BTreeSet::new();
    for c in d.pre.iter().chain(&d.hold) {
        let (positive, atom) = lit(c)?;
        pre.insert(Literal { positive, atom });
    }
    let mut add = BTreeSet::new();
    let mut del = BTreeSet::new();
    for c in &d.post {
        let (positive, atom) = lit(c)?;
        if positive {
            add.insert(atom);
        } else {
            del.insert(atom);
        }
    }
    Ok(Compiled {
        action: PlanningAction {
            name: d.name.clone(),
            params,
            pre,
            add,
            del,
        },
        headline,
        preds,
    })
}

/// Deletes implied by single-valued state: a property value replaces its
/// siblings, `contain` has one container per object and `at` one place per
/// subject.
fn exclusive_deletes(a: &mut PlanningAction, sources: &BTreeMap<String, PredSource>) {
    let contain = vocab::contain().mangled();
    let at = vocab::at().mangled();
    let mut extra = BTreeSet::new();
    for added in &a.add {
        match sources.get(&added.pred) {
            Some(PredSource::PropertyValue { property, .. }) => {
                for (name, src) in sources {
                    if let PredSource::PropertyValue { property: p, .. } = src {
                        if p == property && *name != added.pred {
                            extra.insert(Atom {
                                pred: name.clone(),
                                args: added.args.clone(),
                            });
                        }
                    }
                }
            }
            Some(PredSource::Relation { .. }) if added.pred == contain || added.pred == at => {
                let keep = if added.pred == contain { 1 } else { 0 };
                for l in &a.pre {
                    if l.positive
                        && l.atom.pred == added.pred
                        && l.atom.args[keep] == added.args[keep]
                        && l.atom.args != added.args
                    {
                        extra.insert(l.atom.clone());
                    }
                }
            }
            _ => {}
        }
    }
    a.del.extend(extra);
}

fn join(g: &Graph, a: &Iri, b: &Iri) -> Option<Iri> {
    if g.is_subclass_of(b, a) {
        return Some(a.clone());
    }
    if g.is_subclass_of(a, b) {
        return Some(b.clone());
    }
    let mut cur = a.clone();
    loop {
        let mut supers: Vec<Iri> = g.direct_superclasses(&cur).filter(|s| g.is_concept(s)).cloned().collect();
        supers.sort();
        let next = supers.into_iter().next()?;
        if g.is_subclass_of(b, &next) {
            return Some(next);
        }
        cur = next;
    }
}

fn type_tree(g: &Graph, used: &BTreeSet<Iri>) -> BTreeMap<Iri, Option<Iri>> {
    let mut all: BTreeSet<Iri> = BTreeSet::new();
    for c in g.concepts() {
        if used.iter().any(|u| g.is_subclass_of(&c, u)) {
            all.insert(c);
        }
    }
    for u in used {
        all.insert(u.clone());
        all.extend(g.superclasses(u).filter(|s| g.is_concept(s)).cloned());
    }
    all.iter()
        .map(|t| {
            let mut supers: Vec<Iri> = g.direct_superclasses(t).filter(|s| all.contains(*s)).cloned().collect();
            supers.sort();
            (t.clone(), supers.into_iter().next())
        })
        .collect()
}

/// Compiles every planning-enabled description of the registry.
///
/// Relations become binary predicates named after the mangled relation,
/// `=` property checks become `<Local>_<Value>` and has-property checks
/// `<Local>_present`. Pre and hold conditions are preconditions; post
/// conditions are effects.
pub fn generate_domain(registry: &Registry, wm: &WmSnapshot) -> PlanningDomain {
    let g = wm.graph();
    let mut out = PlanningDomain {
        domain: Domain {
            name: "skills".to_string(),
            ..Domain::default()
        },
        ..PlanningDomain::default()
    };
    let mut compiled = Vec::new();
    for d in registry.descriptions().filter(|d| d.planning) {
        match compile(d) {
            Err(reason) => {
                info!("skill {} left out of the planning domain: {reason}", d.name);
                out.excluded.push(Exclusion {
                    skill: d.name.clone(),
                    reason,
                });
            }
            Ok(c) => {
                let clash = c.preds.iter().find_map(|(n, s)| match out.sources.get(n) {
                    Some(prev) if prev != s => Some(n.clone()),
                    _ => None,
                });
                if let Some(n) = clash {
                    out.excluded.push(Exclusion {
                        skill: d.name.clone(),
                        reason: format!("predicate name {n} already stands for another condition"),
                    });
                    continue;
                }
                out.sources.extend(c.preds.iter().cloned());
                if let Some(h) = c.headline {
                    out.headlines.insert(d.name.clone(), h);
                }
                compiled.push(c.action);
            }
        }
    }
    let mut used = BTreeSet::new();
    let mut pred_types: BTreeMap<String, Vec<Option<Iri>>> = BTreeMap::new();
    for a in &mut compiled {
        exclusive_deletes(a, &out.sources);
        for p in &a.params {
            used.insert(p.ty.clone());
        }
        let atoms = a.pre.iter().map(|l| &l.atom).chain(&a.add).chain(&a.del);
        for atom in atoms {
            let types: Vec<Option<Iri>> = atom.args.iter().map(|v| a.param(v).map(|p| p.ty.clone())).collect();
            match pred_types.get_mut(&atom.pred) {
                None => {
                    pred_types.insert(atom.pred.clone(), types);
                }
                Some(prev) => {
                    for (slot, t) in prev.iter_mut().zip(types) {
                        *slot = match (slot.take(), t) {
                            (Some(x), Some(y)) => join(g, &x, &y),
                            _ => None,
                        };
                    }
                }
            }
        }
    }
    for ts in pred_types.values() {
        used.extend(ts.iter().flatten().cloned());
    }
    out.domain.types = type_tree(g, &used);
    out.domain.predicates = pred_types;
    out.domain.actions = compiled;
    out
}
