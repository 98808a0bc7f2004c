use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Atom, Literal, PlanError, PlanningDomain, PredSource, Problem};
use crate::ontology::{Iri, RdfTerm};
use crate::skill::condition::compare;
use crate::skill::CmpOp;
use crate::world_model::WmSnapshot;

/// One goal line: `[not] predicate subject object`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalLiteral {
    pub positive: bool,
    pub predicate: Iri,
    pub subject: Iri,
    pub object: RdfTerm,
}

impl GoalLiteral {
    pub fn relation(predicate: &str, subject: &str, object: &str) -> Self {
        GoalLiteral {
            positive: true,
            predicate: Iri::must(predicate),
            subject: Iri::must(subject),
            object: RdfTerm::Iri(Iri::must(object)),
        }
    }

    /// Evaluates the literal directly against the world model.
    pub fn holds(&self, wm: &WmSnapshot) -> bool {
        let present = match &self.object {
            RdfTerm::Iri(o) => wm.has_relation(&self.subject, &self.predicate, o),
            lit => wm
                .values(&self.subject, &self.predicate)
                .iter()
                .any(|v| compare(v, CmpOp::Eq, lit).unwrap_or(false)),
        };
        present == self.positive
    }
}

impl fmt::Display for GoalLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            write!(f, "not ")?;
        }
        let obj = match &self.object {
            RdfTerm::Iri(i) => i.to_string(),
            RdfTerm::Str(s) => s.clone(),
            other => other.to_turtle(),
        };
        write!(f, "{} {} {}", self.predicate, self.subject, obj)
    }
}

fn object_token(tok: &str) -> RdfTerm {
    if let Ok(i) = Iri::parse(tok) {
        return RdfTerm::Iri(i);
    }
    if let Ok(i) = tok.parse::<i64>() {
        return RdfTerm::Int(i);
    }
    if let Some(f) = tok.parse::<f64>().ok().and_then(RdfTerm::float) {
        return f;
    }
    match tok {
        "true" => RdfTerm::Bool(true),
        "false" => RdfTerm::Bool(false),
        _ => RdfTerm::Str(tok.trim_matches('"').to_string()),
    }
}

/// Parses newline-separated goal literals. Blank lines and `#` comments
/// are skipped.
pub fn parse_goal(text: &str) -> Result<Vec<GoalLiteral>, PlanError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks: Vec<&str> = line.split_whitespace().collect();
        let positive = if toks.first() == Some(&"not") {
            toks.remove(0);
            false
        } else {
            true
        };
        let err = |m: String| PlanError::SyntaxError { line: n + 1, message: m };
        if toks.len() != 3 {
            return Err(err(format!("expected `[not] predicate subject object`, got `{line}`")));
        }
        let predicate = Iri::parse(toks[0]).map_err(|e| err(e.to_string()))?;
        let subject = Iri::parse(toks[1]).map_err(|e| err(e.to_string()))?;
        out.push(GoalLiteral {
            positive,
            predicate,
            subject,
            object: object_token(toks[2]),
        });
    }
    Ok(out)
}

fn fits(pd: &PlanningDomain, objects: &BTreeMap<Iri, Iri>, pred: &str, args: &[&Iri]) -> bool {
    let Some(types) = pd.domain.predicates.get(pred) else {
        return false;
    };
    args.iter().zip(types).all(|(a, t)| match (objects.get(*a), t) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(ot), Some(t)) => pd.domain.is_subtype(ot, t),
    })
}

/// Grounds the domain against the snapshot: objects are instances of
/// domain types and init holds every matching relation and property atom.
pub fn generate_problem(
    pd: &PlanningDomain,
    wm: &WmSnapshot,
    goal: &[GoalLiteral],
) -> Result<Problem, PlanError> {
    if goal.is_empty() {
        return Err(PlanError::EmptyGoal);
    }
    let mut objects = BTreeMap::new();
    for e in wm.element_ids() {
        if let Some(t) = wm.element_type(&e) {
            if pd.domain.types.contains_key(&t) {
                objects.insert(e, t);
            }
        }
    }
    let mut init = BTreeSet::new();
    for (name, src) in &pd.sources {
        match src {
            PredSource::Relation { predicate } => {
                for (s, o) in wm.graph().with_predicate(predicate) {
                    if let Some(o) = o.as_iri() {
                        if fits(pd, &objects, name, &[s, o]) {
                            init.insert(Atom {
                                pred: name.clone(),
                                args: vec![s.to_string(), o.to_string()],
                            });
                        }
                    }
                }
            }
            PredSource::PropertyValue { property, value } => {
                for o in objects.keys() {
                    let hit = wm
                        .values(o, property)
                        .iter()
                        .any(|v| compare(v, CmpOp::Eq, value).unwrap_or(false));
                    if hit && fits(pd, &objects, name, &[o]) {
                        init.insert(Atom {
                            pred: name.clone(),
                            args: vec![o.to_string()],
                        });
                    }
                }
            }
            PredSource::PropertyPresent { property } => {
                for o in objects.keys() {
                    if !wm.values(o, property).is_empty() && fits(pd, &objects, name, &[o]) {
                        init.insert(Atom {
                            pred: name.clone(),
                            args: vec![o.to_string()],
                        });
                    }
                }
            }
        }
    }
    let mut goals = BTreeSet::new();
    for g in goal {
        let known = |i: &Iri| {
            if objects.contains_key(i) {
                Ok(i.to_string())
            } else {
                Err(PlanError::UnknownObject(i.to_string()))
            }
        };
        let atom = match &g.object {
            RdfTerm::Iri(o) => {
                let name = g.predicate.mangled();
                if !matches!(pd.sources.get(&name), Some(PredSource::Relation { .. })) {
                    return Err(PlanError::UnknownPredicate(g.predicate.to_string()));
                }
                Atom {
                    pred: name,
                    args: vec![known(&g.subject)?, known(o)?],
                }
            }
            lit => {
                let name = pd
                    .sources
                    .iter()
                    .find(|(_, s)| match s {
                        PredSource::PropertyValue { property, value } => {
                            *property == g.predicate && compare(value, CmpOp::Eq, lit).unwrap_or(false)
                        }
                        _ => false,
                    })
                    .map(|(n, _)| n.clone())
                    .ok_or_else(|| PlanError::UnknownPredicate(format!("{} = {}", g.predicate, lit.to_turtle())))?;
                Atom {
                    pred: name,
                    args: vec![known(&g.subject)?],
                }
            }
        };
        goals.insert(Literal {
            positive: g.positive,
            atom,
        });
    }
    Ok(Problem {
        name: "mission".to_string(),
        domain: pd.domain.name.clone(),
        objects,
        init,
        goal: goals,
    })
}
