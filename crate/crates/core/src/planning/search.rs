use std::collections::{HashMap, HashSet, VecDeque};

use super::{Atom, Domain, Literal, Plan, PlanError, PlanStep, PlanningAction, Problem};
use crate::ontology::Iri;

pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

type State = Vec<u64>;

struct Ground {
    name: String,
    args: Vec<String>,
    pre_pos: Vec<usize>,
    pre_neg: Vec<usize>,
    add: Vec<usize>,
    del: Vec<usize>,
}

#[derive(Default)]
struct AtomIndex {
    ids: HashMap<Atom, usize>,
}

impl AtomIndex {
    fn id(&mut self, a: Atom) -> usize {
        let n = self.ids.len();
        *self.ids.entry(a).or_insert(n)
    }
}

fn has(s: &State, i: usize) -> bool {
    s.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
}

fn set(s: &mut State, i: usize, on: bool) {
    if s.len() <= i / 64 {
        s.resize(i / 64 + 1, 0);
    }
    if on {
        s[i / 64] |= 1 << (i % 64);
    } else {
        s[i / 64] &= !(1 << (i % 64));
    }
}

fn substitute(a: &Atom, binding: &HashMap<&str, &str>) -> Atom {
    Atom {
        pred: a.pred.clone(),
        args: a
            .args
            .iter()
            .map(|v| binding.get(v.as_str()).map_or_else(|| v.clone(), |o| o.to_string()))
            .collect(),
    }
}

struct Grounder<'a> {
    problem: &'a Problem,
    fluents: HashSet<&'a str>,
    index: AtomIndex,
    out: Vec<Ground>,
}

impl<'a> Grounder<'a> {
    fn candidates(&self, domain: &Domain, ty: &Iri) -> Vec<String> {
        let mut v: Vec<String> = self
            .problem
            .objects
            .iter()
            .filter(|(_, t)| domain.is_subtype(t, ty))
            .map(|(o, _)| o.to_string())
            .collect();
        v.sort();
        v
    }

    /// Static literals whose variables are all bound must already agree
    /// with init.
    fn static_ok(&self, a: &PlanningAction, b: &HashMap<&str, &str>) -> bool {
        a.pre.iter().all(|l| {
            if self.fluents.contains(l.atom.pred.as_str()) || !l.atom.args.iter().all(|v| b.contains_key(v.as_str())) {
                return true;
            }
            self.problem.init.contains(&substitute(&l.atom, b)) == l.positive
        })
    }

    fn ground(&mut self, domain: &Domain, a: &'a PlanningAction) {
        let cands: Vec<Vec<String>> = a.params.iter().map(|p| self.candidates(domain, &p.ty)).collect();
        let mut chosen: Vec<usize> = Vec::new();
        self.rec(a, &cands, &mut chosen);
    }

    fn rec(&mut self, a: &'a PlanningAction, cands: &[Vec<String>], chosen: &mut Vec<usize>) {
        let binding: HashMap<&str, &str> = a
            .params
            .iter()
            .zip(chosen.iter())
            .enumerate()
            .map(|(i, (p, c))| (p.name.as_str(), cands[i][*c].as_str()))
            .collect();
        if !self.static_ok(a, &binding) {
            return;
        }
        if chosen.len() == a.params.len() {
            let mut g = Ground {
                name: a.name.clone(),
                args: chosen.iter().enumerate().map(|(i, c)| cands[i][*c].clone()).collect(),
                pre_pos: Vec::new(),
                pre_neg: Vec::new(),
                add: Vec::new(),
                del: Vec::new(),
            };
            for l in &a.pre {
                if !self.fluents.contains(l.atom.pred.as_str()) {
                    continue;
                }
                let id = self.index.id(substitute(&l.atom, &binding));
                if l.positive {
                    g.pre_pos.push(id);
                } else {
                    g.pre_neg.push(id);
                }
            }
            g.add = a.add.iter().map(|x| self.index.id(substitute(x, &binding))).collect();
            g.del = a.del.iter().map(|x| self.index.id(substitute(x, &binding))).collect();
            drop(binding);
            self.out.push(g);
            return;
        }
        drop(binding);
        let i = chosen.len();
        for c in 0..cands[i].len() {
            chosen.push(c);
            self.rec(a, cands, chosen);
            chosen.pop();
        }
    }
}

pub fn plan(domain: &Domain, problem: &Problem) -> Result<Plan, PlanError> {
    plan_with_limit(domain, problem, DEFAULT_STATE_LIMIT)
}

/// Breadth-first search over ground states, which is uniform-cost search
/// for unit action costs. Successors are generated in lexicographic order of
/// the grounded action signature and states are deduplicated, so the
/// returned plan is the lexicographically first among the shortest.
pub fn plan_with_limit(domain: &Domain, problem: &Problem, limit: usize) -> Result<Plan, PlanError> {
    for l in &problem.goal {
        if !domain.predicates.contains_key(&l.atom.pred) {
            return Err(PlanError::UnknownPredicate(l.atom.pred.clone()));
        }
    }
    let fluents: HashSet<&str> = domain
        .actions
        .iter()
        .flat_map(|a| a.add.iter().chain(&a.del))
        .map(|x| x.pred.as_str())
        .collect();
    let mut gr = Grounder {
        problem,
        fluents,
        index: AtomIndex::default(),
        out: Vec::new(),
    };
    for a in &domain.actions {
        gr.ground(domain, a);
    }
    let mut actions = gr.out;
    actions.sort_by(|x, y| (&x.name, &x.args).cmp(&(&y.name, &y.args)));
    let mut index = gr.index;
    let mut start = State::new();
    for a in &problem.init {
        let id = index.id(a.clone());
        set(&mut start, id, true);
    }
    let goal: Vec<(usize, bool)> = problem
        .goal
        .iter()
        .map(|Literal { positive, atom }| (index.id(atom.clone()), *positive))
        .collect();
    let words = index.ids.len().div_ceil(64);
    start.resize(words, 0);
    let is_goal = |s: &State| goal.iter().all(|(i, p)| has(s, *i) == *p);

    let mut nodes: Vec<(State, usize, usize)> = vec![(start.clone(), usize::MAX, usize::MAX)];
    let mut seen: HashSet<State> = HashSet::new();
    seen.insert(start.clone());
    let mut queue = VecDeque::from([0usize]);
    let mut found = if is_goal(&start) { Some(0) } else { None };
    let mut expanded = 0usize;
    while found.is_none() {
        let Some(n) = queue.pop_front() else {
            return Err(PlanError::NoPlan);
        };
        expanded += 1;
        if expanded > limit {
            return Err(PlanError::ResourceLimit(limit));
        }
        let state = nodes[n].0.clone();
        for (ai, a) in actions.iter().enumerate() {
            if !a.pre_pos.iter().all(|i| has(&state, *i)) || a.pre_neg.iter().any(|i| has(&state, *i)) {
                continue;
            }
            let mut next = state.clone();
            for d in &a.del {
                set(&mut next, *d, false);
            }
            for x in &a.add {
                set(&mut next, *x, true);
            }
            if seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            let done = is_goal(&next);
            nodes.push((next, n, ai));
            let id = nodes.len() - 1;
            if done {
                found = Some(id);
                break;
            }
            queue.push_back(id);
        }
    }
    let mut steps = Vec::new();
    let mut cur = found.expect("loop exits with a goal node");
    while nodes[cur].1 != usize::MAX {
        let a = &actions[nodes[cur].2];
        steps.push(PlanStep {
            action: a.name.clone(),
            args: a.args.iter().map(|s| Iri::must(s)).collect(),
        });
        cur = nodes[cur].1;
    }
    steps.reverse();
    Ok(Plan { steps })
}
