use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rskill::ontology::{base_ontology, vocab, Graph, Iri, RdfTerm};
use rskill::sim;
use rskill::skill::{infer_parameters, Bindings, CmpOp, ConditionSpec, Flavor, Registry, SkillDescription, SkillError, Value};
use rskill::skill_manager::builtin;
use rskill::world_model::{NewElement, WmSnapshot, WorldModel};

use super::Outcome;

const SCENES: usize = 100;
const QUERIES_PER_SCENE: usize = 6;

fn id(s: &str) -> Iri {
    Iri::must(s)
}

fn random_scene(rng: &mut ChaCha8Rng) -> WmSnapshot {
    let mut m = WorldModel::new(base_ontology()).unwrap();
    let add = |m: &mut WorldModel, name: String, ty: &str| {
        let i = id(&name);
        m.add_element_with_id(i.clone(), NewElement::of_type(id(ty))).unwrap();
        i
    };
    let robot = add(&mut m, "skiros:robot1".into(), "skiros:Robot");
    let locs: Vec<Iri> = (0..rng.gen_range(1..=4))
        .map(|i| {
            let ty = if rng.gen_bool(0.5) { "skiros:Workstation" } else { "skiros:Location" };
            add(&mut m, format!("skiros:loc{i}"), ty)
        })
        .collect();
    let arms: Vec<Iri> = (0..rng.gen_range(1..=2))
        .map(|i| add(&mut m, format!("skiros:arm{i}"), "scalable:UR5"))
        .collect();
    let grippers: Vec<Iri> = (0..rng.gen_range(0..=3))
        .map(|i| {
            let ty = if rng.gen_bool(0.5) { "scalable:RobotiqGripper" } else { "rparts:GripperEffector" };
            add(&mut m, format!("skiros:gripper{i}"), ty)
        })
        .collect();
    let objects: Vec<Iri> = (0..rng.gen_range(1..=3))
        .map(|i| add(&mut m, format!("skiros:obj{i}"), "skiros:Product"))
        .collect();
    let contain = vocab::contain();
    for g in &grippers {
        let state = ["Empty", "Full", "Unknown"].choose(rng).unwrap();
        if rng.gen_bool(0.9) {
            m.set_property(g, &vocab::container_state(), vec![RdfTerm::Str(state.to_string())])
                .unwrap();
        }
        let arm = arms.choose(rng).unwrap();
        m.set_relation(arm, &vocab::has_a(), g, true).unwrap();
    }
    for (i, l) in locs.iter().enumerate() {
        if i > 0 && rng.gen_bool(0.4) {
            let p = &locs[rng.gen_range(0..i)];
            m.set_relation(p, &contain, l, true).unwrap();
        }
    }
    for o in &objects {
        let holders: Vec<&Iri> = locs.iter().chain(grippers.iter()).collect();
        if rng.gen_bool(0.85) {
            let h = holders.choose(rng).unwrap();
            m.set_relation(h, &contain, o, true).unwrap();
        }
    }
    let at = locs.choose(rng).unwrap();
    m.set_relation(&robot, &vocab::at(), at, true).unwrap();
    m.snapshot()
}

/// Elements whose asserted type is `concept` or one of its subclasses.
fn candidates(wm: &WmSnapshot, concept: &Iri) -> Vec<Iri> {
    let g = wm.graph();
    let mut out: Vec<Iri> = wm
        .element_ids()
        .into_iter()
        .filter(|e| {
            g.objects(e, &vocab::rdf_type())
                .filter_map(RdfTerm::as_iri)
                .any(|t| g.is_subclass_of(t, concept))
        })
        .collect();
    out.sort();
    out
}

fn el<'a>(b: &'a Bindings, k: &str) -> &'a Iri {
    match &b[k] {
        Value::Element(i) => i,
        other => panic!("{k} bound to {other}"),
    }
}

fn holds(g: &Graph, c: &ConditionSpec, b: &Bindings) -> bool {
    let raw = match c {
        ConditionSpec::Relation {
            predicate,
            subject,
            object,
            ..
        } => g.has(el(b, subject), predicate, &RdfTerm::Iri(el(b, object).clone())),
        ConditionSpec::Property {
            property,
            param,
            op,
            value,
            ..
        } => {
            assert_eq!(*op, CmpOp::Eq, "oracle only covers equality");
            g.objects(el(b, param), property).any(|v| v == value)
        }
        ConditionSpec::HasProperty { property, param, .. } => g.objects(el(b, param), property).next().is_some(),
        ConditionSpec::AbstractRelation { .. } => panic!("oracle does not cover abstract relations"),
    };
    raw == c.desired()
}

fn all_hold(g: &Graph, d: &SkillDescription, b: &Bindings) -> bool {
    d.pre.iter().all(|c| holds(g, c, b))
}

/// Exhaustive enumeration over every open inferred parameter.
fn enumerate(wm: &WmSnapshot, d: &SkillDescription, partial: &Bindings) -> usize {
    let open: Vec<(String, Vec<Iri>)> = d
        .params
        .iter()
        .filter(|p| p.flavor == Flavor::Inferred && !partial.contains_key(&p.key))
        .map(|p| (p.key.clone(), candidates(wm, p.concept().unwrap())))
        .collect();
    let mut count = 0;
    let mut idx = vec![0usize; open.len()];
    if open.iter().any(|(_, c)| c.is_empty()) {
        return 0;
    }
    loop {
        let mut b = partial.clone();
        for ((k, c), i) in open.iter().zip(&idx) {
            b.insert(k.clone(), Value::Element(c[*i].clone()));
        }
        if all_hold(wm.graph(), d, &b) {
            count += 1;
        }
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return count;
            }
            idx[pos] += 1;
            if idx[pos] < open[pos].1.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn random_partial(rng: &mut ChaCha8Rng, wm: &WmSnapshot, d: &SkillDescription) -> Bindings {
    let mut b = Bindings::new();
    b.insert("Robot".into(), Value::Element(id("skiros:robot1")));
    for p in &d.params {
        let c = candidates(wm, p.concept().unwrap());
        let bind = p.flavor == Flavor::Required || rng.gen_bool(0.15);
        if let (true, Some(x)) = (bind, c.choose(rng)) {
            b.insert(p.key.clone(), Value::Element(x.clone()));
        }
    }
    b
}

pub fn criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let g = base_ontology();
    let registry = Registry::build(&[builtin::library(), sim::library()], &g).map_err(|e| e.to_string())?;
    let skills: Vec<&SkillDescription> = ["pick", "place", "drive"]
        .iter()
        .map(|s| registry.description(s).unwrap())
        .collect();
    let (mut sat, mut unsat, mut skipped) = (0, 0, 0);
    for scene in 0..SCENES {
        let wm = random_scene(&mut rng);
        for _ in 0..QUERIES_PER_SCENE {
            let d = *skills.choose(&mut rng).unwrap();
            let partial = random_partial(&mut rng, &wm, d);
            if d.params.iter().any(|p| p.flavor == Flavor::Required && !partial.contains_key(&p.key)) {
                skipped += 1;
                continue;
            }
            let solutions = enumerate(&wm, d, &partial);
            match infer_parameters(d, &partial, &wm) {
                Ok(b) => {
                    if solutions == 0 {
                        return Err(format!("scene {scene} {}: inferred {b:?} but the oracle finds none", d.name));
                    }
                    if partial.iter().any(|(k, v)| b.get(k) != Some(v)) {
                        return Err(format!("scene {scene} {}: changed a given parameter", d.name));
                    }
                    for p in d.params.iter().filter(|p| p.flavor == Flavor::Inferred) {
                        let v = el(&b, &p.key);
                        if !candidates(&wm, p.concept().unwrap()).contains(v) {
                            return Err(format!("scene {scene} {}: {}={v} has the wrong type", d.name, p.key));
                        }
                    }
                    if !all_hold(wm.graph(), d, &b) {
                        return Err(format!("scene {scene} {}: {b:?} violates a pre-condition", d.name));
                    }
                    sat += 1;
                }
                Err(SkillError::NoConsistentAssignment { .. }) => {
                    if solutions > 0 {
                        return Err(format!(
                            "scene {scene} {}: oracle finds {solutions} assignments, inference none",
                            d.name
                        ));
                    }
                    unsat += 1;
                }
                Err(e) => return Err(format!("scene {scene} {}: {e}", d.name)),
            }
        }
    }
    Ok(format!(
        "{SCENES} scenes, {} queries agree with exhaustive enumeration ({sat} satisfiable, {unsat} not), {skipped} skipped for lack of required elements",
        sat + unsat
    ))
}
