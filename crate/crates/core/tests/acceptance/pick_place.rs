use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rskill::bt::Diagnostic;
use rskill::ontology::{base_ontology, parse_turtle, vocab, Iri, RdfTerm};
use rskill::planning::{generate_domain, generate_problem, plan, validate_plan, GoalLiteral, Plan, PlanningDomain};
use rskill::sim::{self, SimRunner, SimScenario};
use rskill::skill::{Registry, Value};
use rskill::skill_manager::{builtin, TaskState};
use rskill::task_manager::MissionState;
use rskill::world_model::WorldModel;

use super::Outcome;

const INSTANCES: usize = 200;

/// Symbolic pick-place world used by the oracle.
#[derive(Debug, Clone)]
struct World {
    /// Workstation flag and containing workstation per location.
    locs: Vec<(bool, Option<usize>)>,
    objects: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    robot: usize,
    held: Option<usize>,
    /// Direct container of each object; `None` while held.
    on: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Act {
    Drive(usize),
    Pick(usize),
    Place(usize),
}

#[derive(Debug, Clone, Copy)]
enum Goal {
    On { loc: usize, obj: usize, positive: bool },
    Holding { obj: usize, positive: bool },
    RobotAt { loc: usize },
}

impl World {
    fn apply(&self, s: &State, a: Act) -> Option<State> {
        let mut n = s.clone();
        match a {
            Act::Drive(t) => n.robot = t,
            Act::Pick(o) => {
                if s.held.is_some() || s.on[o] != Some(s.robot) {
                    return None;
                }
                n.held = Some(o);
                n.on[o] = None;
            }
            Act::Place(t) => {
                let o = s.held?;
                if self.locs[t].1 != Some(s.robot) {
                    return None;
                }
                n.held = None;
                n.on[o] = Some(t);
            }
        }
        Some(n)
    }

    fn successors(&self, s: &State) -> Vec<State> {
        let mut acts: Vec<Act> = (0..self.locs.len()).map(Act::Drive).collect();
        acts.extend((0..self.objects).map(Act::Pick));
        acts.extend((0..self.locs.len()).map(Act::Place));
        acts.into_iter().filter_map(|a| self.apply(s, a)).collect()
    }

    fn satisfied(s: &State, goals: &[Goal]) -> bool {
        goals.iter().all(|g| match *g {
            Goal::On { loc, obj, positive } => (s.on[obj] == Some(loc)) == positive,
            Goal::Holding { obj, positive } => (s.held == Some(obj)) == positive,
            Goal::RobotAt { loc } => s.robot == loc,
        })
    }

    /// Breadth-first search over symbolic states.
    fn shortest(&self, init: &State, goals: &[Goal]) -> Option<usize> {
        let mut seen: HashSet<State> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(init.clone());
        queue.push_back((init.clone(), 0));
        while let Some((s, d)) = queue.pop_front() {
            if Self::satisfied(&s, goals) {
                return Some(d);
            }
            for n in self.successors(&s) {
                if seen.insert(n.clone()) {
                    queue.push_back((n, d + 1));
                }
            }
        }
        None
    }
}

struct Instance {
    world: World,
    init: State,
    goals: Vec<Goal>,
    turtle: String,
    literals: Vec<GoalLiteral>,
}

fn loc_name(i: usize) -> String {
    format!("skiros:loc{i}")
}

fn obj_name(i: usize) -> String {
    format!("skiros:obj{i}")
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(2..=3);
    let mut ws: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    if !ws.contains(&true) {
        let i = rng.gen_range(0..n);
        ws[i] = true;
    }
    let stations: Vec<usize> = (0..n).filter(|i| ws[*i]).collect();
    let locs: Vec<(bool, Option<usize>)> = (0..n)
        .map(|i| {
            let parent = (!ws[i] && rng.gen_bool(0.6)).then(|| stations[rng.gen_range(0..stations.len())]);
            (ws[i], parent)
        })
        .collect();
    let objects = rng.gen_range(1..=2);
    let robot = rng.gen_range(0..n);
    let mut held = None;
    let mut on = Vec::new();
    for o in 0..objects {
        if held.is_none() && rng.gen_bool(0.15) {
            held = Some(o);
            on.push(None);
        } else {
            on.push(Some(rng.gen_range(0..n)));
        }
    }
    let mut goals = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let obj = rng.gen_range(0..objects);
        goals.push(match rng.gen_range(0..10) {
            0..=5 => Goal::On {
                loc: rng.gen_range(0..n),
                obj,
                positive: true,
            },
            6 => Goal::On {
                loc: rng.gen_range(0..n),
                obj,
                positive: false,
            },
            7 | 8 => Goal::Holding {
                obj,
                positive: rng.gen_bool(0.7),
            },
            _ => Goal::RobotAt { loc: rng.gen_range(0..n) },
        });
    }

    let mut t = String::new();
    t.push_str("@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n");
    t.push_str("@prefix scalable: <http://rvmi.aau.dk/ontologies/scalable.owl#> .\n");
    t.push_str("@prefix skiros: <http://rvmi.aau.dk/ontologies/skiros.owl#> .\n");
    for (i, (is_ws, parent)) in locs.iter().enumerate() {
        let ty = if *is_ws { "skiros:Workstation" } else { "skiros:Location" };
        writeln!(t, "{} a {ty} ; rdfs:label \"loc{i}\" .", loc_name(i)).unwrap();
        if let Some(p) = parent {
            writeln!(t, "{} skiros:contain {} .", loc_name(*p), loc_name(i)).unwrap();
        }
    }
    for (o, place) in on.iter().enumerate() {
        writeln!(t, "{} a skiros:Product ; rdfs:label \"obj{o}\" .", obj_name(o)).unwrap();
        match place {
            Some(l) => writeln!(t, "{} skiros:contain {} .", loc_name(*l), obj_name(o)).unwrap(),
            None => writeln!(t, "skiros:gripper1 skiros:contain {} .", obj_name(o)).unwrap(),
        }
    }
    writeln!(
        t,
        "skiros:robot1 a skiros:Robot ; rdfs:label \"robot1\" ; skiros:at {} ; skiros:contain skiros:arm1 ; skiros:hasA skiros:arm1 .",
        loc_name(robot)
    )
    .unwrap();
    t.push_str("skiros:arm1 a scalable:UR5 ; skiros:contain skiros:gripper1 ; skiros:hasA skiros:gripper1 .\n");
    writeln!(
        t,
        "skiros:gripper1 a scalable:RobotiqGripper ; skiros:ContainerState \"{}\" .",
        if held.is_some() { "Full" } else { "Empty" }
    )
    .unwrap();

    let literals = goals
        .iter()
        .map(|g| match *g {
            Goal::On { loc, obj, positive } => GoalLiteral {
                positive,
                ..GoalLiteral::relation("skiros:contain", &loc_name(loc), &obj_name(obj))
            },
            Goal::Holding { obj, positive } => GoalLiteral {
                positive,
                ..GoalLiteral::relation("skiros:contain", "skiros:gripper1", &obj_name(obj))
            },
            Goal::RobotAt { loc } => GoalLiteral::relation("skiros:at", "skiros:robot1", &loc_name(loc)),
        })
        .collect();
    Instance {
        world: World { locs, objects },
        init: State { robot, held, on },
        goals,
        turtle: t,
        literals,
    }
}

fn index_of(iri: &Iri, prefix: &str) -> Option<usize> {
    iri.local().strip_prefix(prefix)?.parse().ok()
}

/// Replays a plan on the oracle world; `Err` names the first bad step.
fn oracle_replay(inst: &Instance, pd: &PlanningDomain, p: &Plan) -> Result<(), String> {
    let mut s = inst.init.clone();
    for (i, step) in p.steps.iter().enumerate() {
        let b = pd.step_bindings(step).map_err(|e| e.to_string())?;
        let arg = |k: &str, prefix: &str| {
            b.get(k)
                .and_then(|v| index_of(v, prefix))
                .ok_or_else(|| format!("step {i}: {k} not bound to a known {prefix}"))
        };
        let act = match step.action.as_str() {
            "drive" => Act::Drive(arg("TargetLocation", "loc")?),
            "pick" => Act::Pick(arg("Object", "obj")?),
            "place" => Act::Place(arg("TargetLocation", "loc")?),
            other => return Err(format!("step {i}: unexpected action {other}")),
        };
        s = inst
            .world
            .apply(&s, act)
            .ok_or_else(|| format!("step {i}: {} not applicable", pd.summary(step)))?;
    }
    if World::satisfied(&s, &inst.goals) {
        Ok(())
    } else {
        Err("goal does not hold after the plan".into())
    }
}

struct Corpus {
    solvable: usize,
    unsolvable_checked: usize,
    length_mismatch: Vec<String>,
    planned: usize,
    invalid: Vec<String>,
    elapsed: Duration,
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        let mut c = Corpus {
            solvable: 0,
            unsolvable_checked: 0,
            length_mismatch: Vec::new(),
            planned: 0,
            invalid: Vec::new(),
            elapsed: Duration::ZERO,
        };
        let start = Instant::now();
        let mut attempts = 0;
        while c.solvable < INSTANCES && attempts < 20 * INSTANCES {
            attempts += 1;
            let inst = random_instance(&mut rng);
            let expected = inst.world.shortest(&inst.init, &inst.goals);
            let scene = parse_turtle(&inst.turtle).expect("generated scene parses");
            let snap = WorldModel::with_scene(base_ontology(), &scene).expect("scene loads").snapshot();
            let registry = Registry::build(&[builtin::library(), sim::library()], snap.graph()).expect("registry");
            let pd = generate_domain(&registry, &snap);
            let problem = generate_problem(&pd, &snap, &inst.literals).expect("problem");
            let got = plan(&pd.domain, &problem);
            let tag = format!("instance {attempts}");
            match (expected, got) {
                (Some(n), Ok(p)) => {
                    c.solvable += 1;
                    c.planned += 1;
                    if p.len() != n {
                        c.length_mismatch.push(format!("{tag}: planner {} vs oracle {n}", p.len()));
                    }
                    if let Err(v) = validate_plan(&pd.domain, &problem, &p) {
                        c.invalid.push(format!("{tag}: {v}"));
                    }
                    if let Err(e) = oracle_replay(&inst, &pd, &p) {
                        c.invalid.push(format!("{tag}: oracle replay {e}"));
                    }
                }
                (Some(n), Err(e)) => {
                    c.solvable += 1;
                    c.length_mismatch.push(format!("{tag}: oracle finds {n} steps, planner says {e}"));
                }
                (None, Ok(p)) => {
                    c.unsolvable_checked += 1;
                    c.planned += 1;
                    c.length_mismatch.push(format!("{tag}: oracle finds no plan, planner returned {} steps", p.len()));
                    if let Err(v) = validate_plan(&pd.domain, &problem, &p) {
                        c.invalid.push(format!("{tag}: {v}"));
                    }
                }
                (None, Err(_)) => c.unsolvable_checked += 1,
            }
        }
        c.elapsed = start.elapsed();
        c
    })
}

pub fn optimality() -> Outcome {
    let c = corpus();
    if c.solvable < INSTANCES {
        return Err(format!("only {} solvable instances generated", c.solvable));
    }
    if !c.length_mismatch.is_empty() {
        return Err(format!("{} mismatches, first: {}", c.length_mismatch.len(), c.length_mismatch[0]));
    }
    if c.elapsed > Duration::from_secs(60) {
        return Err(format!("took {:.1}s", c.elapsed.as_secs_f64()));
    }
    Ok(format!(
        "{}/{} solvable instances match the oracle length, {} unsolvable agree, {:.2}s",
        c.solvable,
        c.solvable,
        c.unsolvable_checked,
        c.elapsed.as_secs_f64()
    ))
}

pub fn validity() -> Outcome {
    let c = corpus();
    let scenario_plan = two_ws_plan()?;
    if !c.invalid.is_empty() {
        return Err(format!("{} invalid plans, first: {}", c.invalid.len(), c.invalid[0]));
    }
    Ok(format!(
        "{} random plans valid under the effect validator and the oracle replay, scenario plan ({scenario_plan} steps) valid",
        c.planned
    ))
}

fn two_ws_plan() -> Result<usize, String> {
    let scene = parse_turtle(sim::SCENE_TWO_WS).map_err(|e| e.to_string())?;
    let snap = WorldModel::with_scene(base_ontology(), &scene).map_err(|e| e.to_string())?.snapshot();
    let registry = Registry::build(&[builtin::library(), sim::library()], snap.graph()).map_err(|e| e.to_string())?;
    let pd = generate_domain(&registry, &snap);
    let problem = generate_problem(&pd, &snap, &[place_goal()]).map_err(|e| e.to_string())?;
    let p = plan(&pd.domain, &problem).map_err(|e| e.to_string())?;
    validate_plan(&pd.domain, &problem, &p).map_err(|v| format!("scenario plan: {v}"))?;
    Ok(p.len())
}

fn place_goal() -> GoalLiteral {
    GoalLiteral::relation("skiros:contain", "skiros:locationB", "skiros:objectA")
}

pub fn end_to_end() -> Outcome {
    let mut runner = SimRunner::new(&SimScenario::new("scene_two_ws.ttl")).map_err(|e| e.to_string())?;
    let info = runner.run_mission(vec![place_goal()], 1000).map_err(|e| e.to_string())?;
    let summaries: Vec<&str> = info.steps.iter().map(|s| s.summary.as_str()).collect();
    let expected = ["drive(workstationA)", "pick(objectA)", "drive(workstationB)", "place(locationB)"];
    if summaries != expected {
        return Err(format!("plan {summaries:?}"));
    }
    if info.state != MissionState::Succeeded {
        return Err(format!("mission {:?}: {:?}", info.state, info.reason));
    }
    let snap = runner.wm().snapshot();
    let present = snap.has_relation(
        &Iri::must("skiros:locationB"),
        &vocab::contain(),
        &Iri::must("skiros:objectA"),
    );
    if !present {
        return Err("goal triple missing from the final world model".into());
    }
    let t = runner.time();
    if t >= 10.0 {
        return Err(format!("sim time {t:.2}s"));
    }
    Ok(format!("4 steps in order, Succeeded, sim time {t:.2}s at 20 Hz"))
}

pub fn hold_reactivity() -> Outcome {
    let mut runner = SimRunner::new(&SimScenario::new("scene_two_ws.ttl")).map_err(|e| e.to_string())?;
    let robot = Iri::must("skiros:robot1");
    let station = Iri::must("skiros:workstationA");
    runner
        .wm()
        .commit(|m| m.set_relation(&robot, &vocab::at(), &station, true))
        .map_err(|e| e.to_string())?;
    let m = runner.manager("robot1").ok_or("no manager robot1")?.clone();
    let mut params = BTreeMap::new();
    params.insert("Object".to_string(), Value::Element(Iri::must("skiros:objectA")));
    params.insert("Arm".to_string(), Value::Element(Iri::must("skiros:arm1")));
    let task = m.start_task("pick", params).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let warmup = rng.gen_range(2..15);
    for _ in 0..warmup {
        runner.step().map_err(|e| e.to_string())?;
    }
    if m.task(&task.id).map_err(|e| e.to_string())?.state != TaskState::Running {
        return Err("pick is not running before the fault".into());
    }
    let before = m.tick();
    runner
        .wm()
        .commit(|w| w.set_relation(&robot, &vocab::at(), &station, false))
        .map_err(|e| e.to_string())?;
    runner.step().map_err(|e| e.to_string())?;
    let info = m.task(&task.id).map_err(|e| e.to_string())?;
    let want = Some(Diagnostic::HoldViolated("RobotAtLocation".into()));
    if info.state != TaskState::Failed || info.diagnostic != want {
        return Err(format!("after one tick: {:?} {:?}", info.state, info.diagnostic));
    }
    if info.finished != Some(before + 1) {
        return Err(format!("finished at tick {:?}, fault after tick {before}", info.finished));
    }
    let snap = runner.wm().snapshot();
    let state = snap.values(&Iri::must("skiros:gripper1"), &vocab::container_state());
    if state != [RdfTerm::Str("Empty".into())] {
        return Err(format!("gripper state changed to {state:?}"));
    }
    Ok(format!("Failure(HoldViolated RobotAtLocation) on the tick after the fault (tick {})", before + 1))
}
