use super::{Bindings, ConditionSpec, Flavor, SkillDescription, SkillError, Value};
use crate::ontology::Iri;
use crate::world_model::WmSnapshot;

/// Why a candidate was rejected during inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub key: String,
    /// `None` when the concept has no instances at all.
    pub candidate: Option<Iri>,
    pub condition: String,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.candidate {
            Some(c) => write!(f, "{}={c}: {}", self.key, self.condition),
            None => write!(f, "{}: {}", self.key, self.condition),
        }
    }
}

struct Search<'a> {
    d: &'a SkillDescription,
    wm: &'a WmSnapshot,
    open: Vec<(String, Vec<Iri>)>,
    deepest: usize,
    rejections: Vec<Rejection>,
}

impl Search<'_> {
    /// First fully bound pre-condition that does not hold. Conditions not
    /// reading `key` were already checked one level up, except at the root.
    fn violated(&self, b: &Bindings, key: &str, root: bool) -> Result<Option<&ConditionSpec>, SkillError> {
        for c in &self.d.pre {
            if (root || c.keys().contains(&key)) && c.is_bound(b) && !c.evaluate(b, self.wm)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    fn note(&mut self, depth: usize, r: Rejection) {
        if depth > self.deepest {
            self.deepest = depth;
            self.rejections.clear();
        }
        if depth == self.deepest {
            self.rejections.push(r);
        }
    }

    fn dfs(&mut self, depth: usize, b: &mut Bindings) -> Result<bool, SkillError> {
        if depth == self.open.len() {
            return Ok(true);
        }
        let (key, candidates) = self.open[depth].clone();
        if candidates.is_empty() {
            let concept = self.d.param(&key).and_then(|p| p.concept()).map(|c| c.to_string());
            self.note(
                depth,
                Rejection {
                    key,
                    candidate: None,
                    condition: format!("no instances of {}", concept.unwrap_or_default()),
                },
            );
            return Ok(false);
        }
        for cand in candidates {
            b.insert(key.clone(), Value::Element(cand.clone()));
            match self.violated(b, &key, depth == 0)? {
                Some(c) => {
                    let r = Rejection {
                        key: key.clone(),
                        candidate: Some(cand),
                        condition: c.name().to_string(),
                    };
                    self.note(depth, r);
                }
                None => {
                    if self.dfs(depth + 1, b)? {
                        return Ok(true);
                    }
                }
            }
        }
        b.remove(&key);
        Ok(false)
    }
}

/// Completes `partial` by grounding every unbound inferred parameter.
///
/// Inferred parameters are tried in declaration order and candidates in
/// canonical IRI order; the first assignment under which every fully bound
/// pre-condition holds is returned.
pub fn infer_parameters(
    d: &SkillDescription,
    partial: &Bindings,
    wm: &WmSnapshot,
) -> Result<Bindings, SkillError> {
    for p in &d.params {
        if p.flavor == Flavor::Required && !partial.contains_key(&p.key) {
            return Err(SkillError::MissingRequired(p.key.clone()));
        }
    }
    let open: Vec<(String, Vec<Iri>)> = d
        .params
        .iter()
        .filter(|p| p.flavor == Flavor::Inferred && !partial.contains_key(&p.key))
        .map(|p| {
            let concept = p.concept().expect("inferred params are elements");
            (p.key.clone(), wm.instances_of(concept))
        })
        .collect();
    if open.is_empty() {
        let checked = d.params.iter().any(|p| p.flavor == Flavor::Inferred);
        for c in d.pre.iter().filter(|_| checked) {
            if c.is_bound(partial) && !c.evaluate(partial, wm)? {
                let key = c.keys().first().map(|k| k.to_string()).unwrap_or_default();
                let candidate = match partial.get(&key) {
                    Some(Value::Element(i)) => Some(i.clone()),
                    _ => None,
                };
                return Err(SkillError::NoConsistentAssignment {
                    skill: d.name.clone(),
                    rejections: vec![Rejection {
                        key,
                        candidate,
                        condition: c.name().to_string(),
                    }],
                });
            }
        }
        return Ok(partial.clone());
    }
    let mut search = Search {
        d,
        wm,
        open,
        deepest: 0,
        rejections: Vec::new(),
    };
    let mut b = partial.clone();
    if search.dfs(0, &mut b)? {
        Ok(b)
    } else {
        Err(SkillError::NoConsistentAssignment {
            skill: d.name.clone(),
            rejections: search.rejections,
        })
    }
}

/// Like [`infer_parameters`] but leaves a binding with nothing left to
/// infer untouched, so violated pre-conditions surface at execution time.
pub fn complete_bindings(d: &SkillDescription, partial: &Bindings, wm: &WmSnapshot) -> Result<Bindings, SkillError> {
    let open = d
        .params
        .iter()
        .any(|p| p.flavor == Flavor::Inferred && !partial.contains_key(&p.key));
    if open {
        infer_parameters(d, partial, wm)
    } else {
        Ok(partial.clone())
    }
}
