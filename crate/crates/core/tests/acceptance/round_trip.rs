use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rskill::ontology::{parse_turtle, serialize_turtle, vocab, Graph, Iri, RdfTerm, Triple};
use rskill::planning::{
    emit_domain, emit_problem, parse_domain, parse_problem, Atom, Domain, Literal, PlanningAction, Problem, TypedVar,
};

use super::Outcome;

const GRAPHS: usize = 500;
const DOMAINS: usize = 100;

const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
const STR_POOL: &[&str] = &[
    "a", "Z", "0", " ", "\"", "\\", "\n", "\r", "\t", "'", "#", "<", ">", ".", ";", ",", "@", "_:", "é", "漢", "🚀",
    "\\n", "\"\"\"", "^^", "true", "1.5",
];

fn word(rng: &mut ChaCha8Rng, max: usize, dash: bool) -> String {
    let len = rng.gen_range(1..=max);
    let mut s = String::new();
    s.push(ALNUM[rng.gen_range(0..52)] as char);
    for _ in 1..len {
        if dash && rng.gen_bool(0.1) {
            s.push('-');
        } else {
            s.push(ALNUM[rng.gen_range(0..ALNUM.len())] as char);
        }
    }
    s
}

fn random_float(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..5) {
        0 => rng.gen_range(-10.0..10.0),
        1 => (rng.gen::<f64>() - 0.5) * 10f64.powi(rng.gen_range(-300..300)),
        2 => *[0.0, -0.0, 1.0, -1.0, 0.1, 1e-300, f64::MAX, f64::MIN_POSITIVE, 5e-324].choose(rng).unwrap(),
        3 => rng.gen_range(-1000i64..1000) as f64,
        _ => loop {
            let v = f64::from_bits(rng.gen());
            if v.is_finite() {
                break v;
            }
        },
    }
}

fn random_term(rng: &mut ChaCha8Rng, iris: &[Iri]) -> RdfTerm {
    match rng.gen_range(0..6) {
        0 | 1 => RdfTerm::Iri(iris.choose(rng).unwrap().clone()),
        2 => {
            let n = rng.gen_range(0..8);
            RdfTerm::Str((0..n).map(|_| *STR_POOL.choose(rng).unwrap()).collect())
        }
        3 => RdfTerm::Int(match rng.gen_range(0..3) {
            0 => rng.gen_range(-100..100),
            1 => *[i64::MIN, i64::MAX, 0, -1].choose(rng).unwrap(),
            _ => rng.gen(),
        }),
        4 => RdfTerm::float(random_float(rng)).unwrap(),
        _ => RdfTerm::Bool(rng.gen()),
    }
}

fn random_graph(rng: &mut ChaCha8Rng) -> Graph {
    let mut g = if rng.gen_bool(0.5) {
        Graph::with_standard_prefixes()
    } else {
        Graph::new()
    };
    let mut names: BTreeSet<String> = g.prefixes().keys().cloned().collect();
    let mut fresh = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let name = word(rng, 6, true).to_lowercase();
        if names.insert(name.clone()) {
            let base = format!("http://example.org/{}/{}#", word(rng, 8, false), name);
            g.add_prefix(&name, &base).unwrap();
            fresh.push(name);
        }
    }
    let prefixes: Vec<String> = g.prefixes().keys().cloned().collect();
    let iris: Vec<Iri> = (0..rng.gen_range(1..=12))
        .map(|_| Iri::new(prefixes.choose(rng).unwrap().clone(), word(rng, 10, true)).unwrap())
        .collect();
    let mut predicates: Vec<Iri> = (0..rng.gen_range(1..=4))
        .map(|_| Iri::new(fresh.choose(rng).unwrap().clone(), word(rng, 8, true)).unwrap())
        .collect();
    if g.prefixes().contains_key("rdfs") {
        predicates.push(vocab::rdfs_label());
    }
    for _ in 0..rng.gen_range(0..=40) {
        let s = iris.choose(rng).unwrap().clone();
        let p = predicates.choose(rng).unwrap().clone();
        let o = random_term(rng, &iris);
        g.insert(Triple::new(s, p, o)).unwrap();
    }
    g
}

fn random_domain(rng: &mut ChaCha8Rng, n: usize) -> Domain {
    let prefixes = ["skiros", "rparts", "scalable", "ex"];
    let mut d = Domain {
        name: format!("dom-{n}"),
        ..Domain::default()
    };
    let types: Vec<Iri> = (0..rng.gen_range(1..=5))
        .map(|i| Iri::new(*prefixes.choose(rng).unwrap(), format!("T{i}{}", word(rng, 4, true))).unwrap())
        .collect();
    for (i, t) in types.iter().enumerate() {
        let parent = (i > 0 && rng.gen_bool(0.6)).then(|| types[rng.gen_range(0..i)].clone());
        d.types.insert(t.clone(), parent);
    }
    for i in 0..rng.gen_range(1..=5) {
        let name = format!("{}_{}{i}", prefixes.choose(rng).unwrap(), word(rng, 5, false));
        let args = (0..rng.gen_range(0..=3))
            .map(|_| rng.gen_bool(0.8).then(|| types.choose(rng).unwrap().clone()))
            .collect();
        d.predicates.insert(name, args);
    }
    let preds: Vec<(String, usize)> = d.predicates.iter().map(|(k, v)| (k.clone(), v.len())).collect();
    for a in 0..rng.gen_range(0..=4) {
        let params: Vec<TypedVar> = (0..rng.gen_range(0..=3))
            .map(|k| TypedVar {
                name: format!("V{k}"),
                ty: types.choose(rng).unwrap().clone(),
            })
            .collect();
        let atom = |rng: &mut ChaCha8Rng| -> Option<Atom> {
            let (p, arity) = preds.choose(rng).unwrap();
            if *arity > 0 && params.is_empty() {
                return None;
            }
            let args: Vec<&str> = (0..*arity).map(|_| params.choose(rng).unwrap().name.as_str()).collect();
            Some(Atom::new(p, &args))
        };
        let mut act = PlanningAction {
            name: format!("act{a}-{}", word(rng, 4, false).to_lowercase()),
            params: params.clone(),
            pre: BTreeSet::new(),
            add: BTreeSet::new(),
            del: BTreeSet::new(),
        };
        for _ in 0..rng.gen_range(0..=4) {
            if let Some(x) = atom(rng) {
                act.pre.insert(if rng.gen_bool(0.7) { Literal::pos(x) } else { Literal::neg(x) });
            }
        }
        for _ in 0..rng.gen_range(0..=3) {
            if let Some(x) = atom(rng) {
                act.add.insert(x);
            }
            if let Some(x) = atom(rng) {
                act.del.insert(x);
            }
        }
        d.actions.push(act);
    }
    d
}

fn random_problem(rng: &mut ChaCha8Rng, d: &Domain, n: usize) -> Problem {
    let types: Vec<&Iri> = d.types.keys().collect();
    let mut p = Problem {
        name: format!("prob-{n}"),
        domain: d.name.clone(),
        ..Problem::default()
    };
    let objects: Vec<Iri> = (0..rng.gen_range(1..=6))
        .map(|i| Iri::new("skiros", format!("o{i}{}", word(rng, 5, true))).unwrap())
        .collect();
    for o in &objects {
        p.objects.insert(o.clone(), (*types.choose(rng).unwrap()).clone());
    }
    let preds: Vec<(&String, usize)> = d.predicates.iter().map(|(k, v)| (k, v.len())).collect();
    let atom = |rng: &mut ChaCha8Rng| {
        let (name, arity) = preds.choose(rng).unwrap();
        let args: Vec<String> = (0..*arity).map(|_| objects.choose(rng).unwrap().to_string()).collect();
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        Atom::new(name, &refs)
    };
    for _ in 0..rng.gen_range(0..=10) {
        p.init.insert(atom(rng));
    }
    for _ in 0..rng.gen_range(1..=4) {
        let a = atom(rng);
        p.goal.insert(if rng.gen_bool(0.7) { Literal::pos(a) } else { Literal::neg(a) });
    }
    p
}

pub fn criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
    let mut triples = 0;
    for i in 0..GRAPHS {
        let g = random_graph(&mut rng);
        triples += g.len();
        let text = serialize_turtle(&g);
        let back = parse_turtle(&text).map_err(|e| format!("graph {i}: {e}\n{text}"))?;
        if back != g {
            return Err(format!("graph {i}: parsed graph differs\n{text}"));
        }
        if serialize_turtle(&back) != text {
            return Err(format!("graph {i}: second serialization differs"));
        }
    }
    let mut actions = 0;
    for i in 0..DOMAINS {
        let d = random_domain(&mut rng, i);
        let p = random_problem(&mut rng, &d, i);
        actions += d.actions.len();
        let dt = emit_domain(&d).map_err(|e| format!("domain {i}: {e}"))?;
        let pt = emit_problem(&p).map_err(|e| format!("problem {i}: {e}"))?;
        let d2 = parse_domain(&dt).map_err(|e| format!("domain {i}: {e}\n{dt}"))?;
        let p2 = parse_problem(&pt).map_err(|e| format!("problem {i}: {e}\n{pt}"))?;
        if d2 != d {
            return Err(format!("domain {i} differs after the round trip\n{dt}"));
        }
        if p2 != p {
            return Err(format!("problem {i} differs after the round trip\n{pt}"));
        }
        if emit_domain(&d2).unwrap() != dt || emit_problem(&p2).unwrap() != pt {
            return Err(format!("pair {i}: second emission differs"));
        }
    }
    Ok(format!(
        "{GRAPHS} Turtle graphs ({triples} triples) and {DOMAINS} domain/problem pairs ({actions} actions) round-trip exactly"
    ))
}
