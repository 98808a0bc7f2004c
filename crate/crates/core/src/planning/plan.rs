use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Atom, Domain, Plan, PlanError, PlanStep, PlanningDomain, Problem};
use crate::bt::{instantiate_skill, BtError, BtNode, Catalog};
use crate::ontology::Iri;
use crate::skill::{Blackboard, Overlay, Registry, Scope, Value};
use crate::world_model::WmSnapshot;

fn parse_arg(tok: &str) -> Result<Iri, String> {
    if tok.contains(':') {
        Iri::parse(tok).map_err(|e| e.to_string())
    } else {
        Iri::unmangle(tok).map_err(|e| e.to_string())
    }
}

/// Reads one grounded action per line, `(name arg ...)`. A leading `N:`
/// time stamp and anything after the closing parenthesis are ignored, as
/// are blank lines and `;` comments.
pub fn parse_plan(text: &str) -> Result<Plan, PlanError> {
    let mut steps = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| PlanError::SyntaxError { line: n + 1, message: m };
        let open = line.find('(').ok_or_else(|| err(format!("expected `(name args...)`, got `{line}`")))?;
        let prefix = line[..open].trim();
        if !prefix.is_empty() && !prefix.strip_suffix(':').is_some_and(|t| t.trim().parse::<f64>().is_ok()) {
            return Err(err(format!("unexpected `{prefix}` before the action")));
        }
        let close = line[open..]
            .find(')')
            .map(|i| i + open)
            .ok_or_else(|| err("missing `)`".to_string()))?;
        let mut toks = line[open + 1..close].split_whitespace();
        let action = toks.next().ok_or_else(|| err("empty action".to_string()))?;
        let args = toks.map(parse_arg).collect::<Result<Vec<_>, _>>().map_err(err)?;
        steps.push(PlanStep {
            action: action.to_string(),
            args,
        });
    }
    Ok(Plan { steps })
}

/// First problem found while replaying a plan. `step` equals the plan
/// length when only the goal fails.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("step {step}: {reason}")]
pub struct PlanViolation {
    pub step: usize,
    pub reason: String,
}

fn ground(a: &Atom, params: &[(String, String)]) -> Atom {
    Atom {
        pred: a.pred.clone(),
        args: a
            .args
            .iter()
            .map(|v| {
                params
                    .iter()
                    .find(|(k, _)| k == v)
                    .map_or_else(|| v.clone(), |(_, o)| o.clone())
            })
            .collect(),
    }
}

/// Replays the plan from init, checking types, preconditions and finally
/// the goal.
pub fn validate_plan(domain: &Domain, problem: &Problem, plan: &Plan) -> Result<(), PlanViolation> {
    let mut state: BTreeSet<Atom> = problem.init.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        let bad = |reason: String| PlanViolation { step: i, reason };
        let a = domain
            .action(&step.action)
            .ok_or_else(|| bad(format!("unknown action {}", step.action)))?;
        if a.params.len() != step.args.len() {
            return Err(bad(format!("{} takes {} arguments", a.name, a.params.len())));
        }
        let mut params = Vec::new();
        for (p, o) in a.params.iter().zip(&step.args) {
            let ty = problem
                .objects
                .get(o)
                .ok_or_else(|| bad(format!("unknown object {o}")))?;
            if !domain.is_subtype(ty, &p.ty) {
                return Err(bad(format!("{o} is a {ty}, not a {}", p.ty)));
            }
            params.push((p.name.clone(), o.to_string()));
        }
        for l in &a.pre {
            let g = ground(&l.atom, &params);
            if state.contains(&g) != l.positive {
                return Err(bad(format!("precondition {} does not hold", if l.positive { g.to_string() } else { format!("not {g}") })));
            }
        }
        for d in &a.del {
            state.remove(&ground(d, &params));
        }
        for x in &a.add {
            state.insert(ground(x, &params));
        }
    }
    for l in &problem.goal {
        if state.contains(&l.atom) != l.positive {
            return Err(PlanViolation {
                step: plan.steps.len(),
                reason: format!("goal {l} does not hold"),
            });
        }
    }
    Ok(())
}

/// Sequential tree with one skill node per step. Plan arguments are
/// specified as constants on each step; remaining inferred parameters are
/// resolved when the node activates.
pub fn plan_to_ebt(
    pd: &PlanningDomain,
    plan: &Plan,
    registry: &Registry,
    catalog: &Catalog,
    wm: &WmSnapshot,
    bb: &Blackboard,
) -> Result<BtNode, BtError> {
    let mut children = Vec::new();
    for step in &plan.steps {
        let bindings = pd
            .step_bindings(step)
            .map_err(|_| BtError::UnknownSkill(step.action.clone()))?;
        let mut overlay = Overlay::default();
        for (k, v) in bindings {
            overlay = overlay.specify(&k, Value::Element(v));
        }
        let scope = Scope::root().child(overlay);
        children.push(instantiate_skill(registry, catalog, wm, bb, &scope, &step.action, None)?);
    }
    Ok(BtNode::sequential(children))
}
