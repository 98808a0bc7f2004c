use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rskill::bt::{
    instantiate_tree, select_implementation, Action, BtNode, Catalog, ExecCtx, NodeState, Primitive, Processor, Step,
    TickCtx,
};
use rskill::ontology::{base_ontology, vocab, Iri, RdfTerm};
use rskill::sim::{self, SimRunner, SimScenario};
use rskill::skill::{parse_manifest, Bindings, Blackboard, Registry, Scope, SkillLibrary, TreeSpec, Value};
use rskill::world_model::{NewElement, WmServer, WorldModel};

use super::Outcome;

const PROCESSORS: [Processor; 4] = [
    Processor::Sequential,
    Processor::Selector,
    Processor::ParallelFirstFail,
    Processor::ParallelFirstSuccess,
];
const STATES: [NodeState; 3] = [NodeState::Success, NodeState::Failure, NodeState::Running];

#[derive(Default)]
struct Probe {
    script: Vec<NodeState>,
    ticked: Vec<u64>,
    preempts: u32,
}

struct Scripted(Arc<Mutex<Probe>>);

impl Action for Scripted {
    fn tick(&mut self, ctx: &mut TickCtx<'_>) -> NodeState {
        let mut p = self.0.lock().unwrap();
        p.ticked.push(ctx.tick);
        p.script[(ctx.tick - 1) as usize]
    }

    fn preempt(&mut self) {
        self.0.lock().unwrap().preempts += 1;
    }
}

/// Result and reached children of one tick, straight from the processor
/// rules.
fn expected(p: Processor, outcomes: &[NodeState]) -> (NodeState, usize) {
    use NodeState::*;
    let n = outcomes.len();
    match p {
        Processor::Sequential | Processor::Selector => {
            let stop = if p == Processor::Sequential { Failure } else { Success };
            let fall = if p == Processor::Sequential { Success } else { Failure };
            for (i, o) in outcomes.iter().enumerate() {
                if *o == stop || *o == Running {
                    return (*o, i + 1);
                }
            }
            (fall, n)
        }
        Processor::ParallelFirstFail | Processor::ParallelFirstSuccess => {
            let decisive = if p == Processor::ParallelFirstFail { Failure } else { Success };
            let other = if p == Processor::ParallelFirstFail { Success } else { Failure };
            let s = if outcomes.contains(&decisive) {
                decisive
            } else if outcomes.contains(&Running) {
                Running
            } else {
                other
            };
            (s, n)
        }
    }
}

fn tuples(n: usize) -> Vec<Vec<NodeState>> {
    (0..n).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|t| {
                STATES.iter().map(move |s| {
                    let mut t = t.clone();
                    t.push(*s);
                    t
                })
            })
            .collect()
    })
}

fn empty_wm() -> WmServer {
    WmServer::new(WorldModel::new(base_ontology()).unwrap())
}

pub fn truth_tables() -> Outcome {
    let wm = empty_wm();
    let mut cases = 0;
    for p in PROCESSORS {
        for n in 0..=3 {
            for first in tuples(n) {
                for second in tuples(n) {
                    let probes: Vec<Arc<Mutex<Probe>>> = (0..n)
                        .map(|i| {
                            Arc::new(Mutex::new(Probe {
                                script: vec![first[i], second[i]],
                                ..Probe::default()
                            }))
                        })
                        .collect();
                    let children = probes
                        .iter()
                        .enumerate()
                        .map(|(i, pr)| BtNode::action(&format!("c{i}"), Scripted(pr.clone())))
                        .collect();
                    let mut root = BtNode::processor(p, children);
                    let mut bb = Blackboard::default();
                    let case = format!("{}{first:?}->{second:?}", p.name());
                    let r1 = root.tick(&mut TickCtx::new(&wm, &mut bb, 1, 10.0));
                    let (e1, reach1) = expected(p, &first);
                    let reached1: Vec<bool> = probes.iter().map(|x| x.lock().unwrap().ticked.contains(&1)).collect();
                    if r1 != e1 || reached1 != (0..n).map(|i| i < reach1).collect::<Vec<_>>() {
                        return Err(format!("{case}: tick 1 gave {r1:?} reaching {reached1:?}"));
                    }
                    let r2 = root.tick(&mut TickCtx::new(&wm, &mut bb, 2, 10.0));
                    let (e2, reach2) = expected(p, &second);
                    if r2 != e2 {
                        return Err(format!("{case}: tick 2 gave {r2:?}, expected {e2:?}"));
                    }
                    for (i, pr) in probes.iter().enumerate() {
                        let pr = pr.lock().unwrap();
                        let ran_1 = i < reach1 && first[i] == NodeState::Running;
                        let ran_2 = i < reach2 && second[i] == NodeState::Running;
                        if r1 == NodeState::Running && ran_1 && i >= reach2 && pr.preempts == 0 {
                            return Err(format!("{case}: child {i} was Running, not reached and not preempted"));
                        }
                        if pr.preempts > 0 && !ran_1 && !ran_2 {
                            return Err(format!("{case}: child {i} preempted without running"));
                        }
                        if (pr.ticked.contains(&2)) != (i < reach2) {
                            return Err(format!("{case}: child {i} reach on tick 2 is wrong"));
                        }
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} two-tick cases over 4 processors and 0..=3 children"))
}

type HookLog = Arc<Mutex<Vec<(usize, &'static str)>>>;

struct Instrumented {
    id: usize,
    log: HookLog,
    rng: Arc<Mutex<ChaCha8Rng>>,
}

impl Instrumented {
    fn note(&self, hook: &'static str) {
        self.log.lock().unwrap().push((self.id, hook));
    }
}

impl Primitive for Instrumented {
    fn on_start(&mut self, _: &mut ExecCtx<'_>) -> bool {
        self.note("start");
        true
    }

    fn execute(&mut self, _: &mut ExecCtx<'_>) -> Step {
        self.note("exec");
        match self.rng.lock().unwrap().gen_range(0..20) {
            0..=11 => Step::Running,
            12..=16 => Step::Success,
            _ => Step::Failure("scripted".into()),
        }
    }

    fn on_preempt(&mut self, _: &mut ExecCtx<'_>) -> bool {
        self.note("preempt");
        true
    }

    fn on_end(&mut self, _: &mut ExecCtx<'_>) -> bool {
        self.note("end");
        true
    }
}

const PROBE_LIB: &str = r#"
[[skill]]
name = "probe"

[[skill]]
name = "guarded"
[[skill.param]]
key = "Gripper"
type = "rparts:GripperEffector"
flavor = "inferred"
[[skill.hold]]
type = "has_property"
name = "GripperHasState"
property = "skiros:ContainerState"
param = "Gripper"

[[primitive]]
name = "probe_impl"
implements = "probe"
factory = "instrumented"

[[primitive]]
name = "guarded_impl"
implements = "guarded"
factory = "instrumented"
"#;

fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> TreeSpec {
    if depth == 0 || rng.gen_bool(0.35) {
        let skill = if rng.gen_bool(0.3) { "guarded" } else { "probe" };
        return TreeSpec::Skill {
            skill: skill.into(),
            implementation: None,
            specify: BTreeMap::new(),
            remap: BTreeMap::new(),
        };
    }
    TreeSpec::Processor {
        processor: *PROCESSORS.choose(rng).unwrap(),
        children: (0..rng.gen_range(1..=3)).map(|_| random_tree(rng, depth - 1)).collect(),
    }
}

/// Checks `start exec+ (end | preempt end)` for every activation.
fn well_formed(hooks: &[&str]) -> bool {
    let mut i = 0;
    while i < hooks.len() {
        if hooks[i] != "start" {
            return false;
        }
        i += 1;
        let execs = hooks[i..].iter().take_while(|h| **h == "exec").count();
        if execs == 0 {
            return false;
        }
        i += execs;
        match hooks.get(i) {
            Some(&"end") => i += 1,
            Some(&"preempt") if hooks.get(i + 1) == Some(&"end") => i += 2,
            _ => return false,
        }
    }
    true
}

pub fn lifecycle() -> Outcome {
    let g = base_ontology();
    let registry = Registry::build(&[parse_manifest(PROBE_LIB).unwrap()], &g).map_err(|e| e.to_string())?;
    let mut model = WorldModel::new(g).unwrap();
    let gripper = model
        .add_element(NewElement::of_type(vocab::gripper_effector()).property(vocab::container_state(), "Empty"))
        .unwrap();
    let wm = WmServer::new(model);
    let log: HookLog = Arc::default();
    let counter = Arc::new(AtomicUsize::new(0));
    let rng = Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(0x5eed_0006)));
    let mut catalog = Catalog::new();
    {
        let (log, counter, rng) = (log.clone(), counter.clone(), rng.clone());
        catalog.register("instrumented", move || Instrumented {
            id: counter.fetch_add(1, Ordering::SeqCst),
            log: log.clone(),
            rng: rng.clone(),
        });
    }
    let mut sched = ChaCha8Rng::seed_from_u64(0x5eed_0106);
    let (mut explicit, mut completed, mut truncated, mut activations) = (0, 0, 0, 0);
    for schedule in 0..1000 {
        log.lock().unwrap().clear();
        wm.commit(|m| m.set_property(&gripper, &vocab::container_state(), vec![RdfTerm::Str("Empty".into())]))
            .unwrap();
        let tree = random_tree(&mut sched, 3);
        let mut bb = Blackboard::new(BTreeMap::new());
        let mut root = instantiate_tree(&registry, &catalog, &wm.snapshot(), &bb, &Scope::root(), &tree)
            .map_err(|e| format!("schedule {schedule}: {e}"))?;
        let horizon = sched.gen_range(1..=25);
        let preempt_at = sched.gen_bool(0.4).then(|| sched.gen_range(1..=horizon));
        let mut ended = false;
        for t in 1..=horizon {
            if sched.gen_bool(0.1) {
                let values = if sched.gen_bool(0.5) { vec![] } else { vec![RdfTerm::Str("Empty".into())] };
                wm.commit(|m| m.set_property(&gripper, &vocab::container_state(), values)).unwrap();
            }
            if preempt_at == Some(t) {
                root.preempt(&mut TickCtx::new(&wm, &mut bb, t, 20.0));
                explicit += 1;
                ended = true;
                break;
            }
            let s = root.tick(&mut TickCtx::new(&wm, &mut bb, t, 20.0));
            if s != NodeState::Running {
                completed += 1;
                ended = true;
                break;
            }
        }
        if !ended {
            root.preempt(&mut TickCtx::new(&wm, &mut bb, horizon + 1, 20.0));
            truncated += 1;
        }
        let entries = log.lock().unwrap().clone();
        let mut per: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for (id, h) in &entries {
            per.entry(*id).or_default().push(h);
        }
        for (id, hooks) in &per {
            if !well_formed(hooks) {
                return Err(format!("schedule {schedule}: primitive {id} saw {hooks:?}"));
            }
            activations += hooks.iter().filter(|h| **h == "start").count();
        }
    }
    Ok(format!(
        "1000 schedules ({completed} ran to completion, {explicit} preempted, {truncated} cut off), {activations} activations, 0 violations"
    ))
}

const GRIP_DECLS: [&str; 3] = [
    "[[primitive]]\nname = \"grip_generic\"\nimplements = \"grip\"\nfactory = \"noop\"\n",
    "[[primitive]]\nname = \"grip_robotiq\"\nimplements = \"grip\"\nfactory = \"noop\"\nrefine = { Gripper = \"scalable:RobotiqGripper\" }\n",
    "[[primitive]]\nname = \"grip_effector\"\nimplements = \"grip\"\nfactory = \"noop\"\nrefine = { Gripper = \"rparts:GripperEffector\" }\n",
];

const GRIP_SKILL: &str = "[[skill]]\nname = \"grip\"\n[[skill.param]]\nkey = \"Gripper\"\ntype = \"rparts:GripperEffector\"\nflavor = \"required\"\n";

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn selection() -> Outcome {
    let g = base_ontology();
    let mut model = WorldModel::new(g.clone()).unwrap();
    let robotiq = model
        .add_element(NewElement::of_type(Iri::must("scalable:RobotiqGripper")))
        .unwrap();
    let plain = model.add_element(NewElement::of_type(vocab::gripper_effector())).unwrap();
    let snap = model.snapshot();
    let bind = |e: &Iri| {
        let mut b = Bindings::new();
        b.insert("Gripper".to_string(), Value::Element(e.clone()));
        b
    };
    let mut choices: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut layouts = 0;
    for perm in permutations(GRIP_DECLS.len()) {
        for split in 0..=GRIP_DECLS.len() {
            let ordered: Vec<&str> = perm.iter().map(|i| GRIP_DECLS[*i]).collect();
            let first = format!("{GRIP_SKILL}{}", ordered[..split].concat());
            let mut libs: Vec<SkillLibrary> = vec![parse_manifest(&first).unwrap()];
            if split < ordered.len() {
                libs.push(parse_manifest(&ordered[split..].concat()).unwrap());
            }
            let reg = Registry::build(&libs, &g).map_err(|e| e.to_string())?;
            for (label, e) in [("robotiq", &robotiq), ("plain", &plain)] {
                let imp = select_implementation(&reg, "grip", &bind(e), &snap).map_err(|e| e.to_string())?;
                *choices.entry((label.to_string(), imp.name.clone())).or_default() += 1;
            }
            layouts += 1;
        }
    }
    let picked = |label: &str| -> Vec<String> {
        choices
            .keys()
            .filter(|(l, _)| l == label)
            .map(|(_, n)| n.clone())
            .collect()
    };
    if picked("robotiq") != ["grip_robotiq"] {
        return Err(format!("RobotiqGripper binding chose {:?}", picked("robotiq")));
    }
    if picked("plain").len() != 1 || picked("plain")[0] == "grip_robotiq" {
        return Err(format!("generic binding chose {:?}", picked("plain")));
    }

    let runner = SimRunner::new(&SimScenario::new("scene_two_ws.ttl")).map_err(|e| e.to_string())?;
    let m = runner.manager("robot1").ok_or("no manager robot1")?;
    let mut params = BTreeMap::new();
    params.insert("Gripper".to_string(), Value::Element(Iri::must("skiros:gripper1")));
    params.insert("OpeningState".to_string(), Value::Bool(true));
    let started = m.start_task("actuate_gripper", params).map_err(|e| e.to_string())?;
    if started.implementation != "actuate_gripper_robotiq" {
        return Err(format!("manager chose {}", started.implementation));
    }
    let mut reversed = sim::library();
    reversed.primitives.reverse();
    let reg = Registry::build(&[reversed], runner.wm().snapshot().graph()).map_err(|e| e.to_string())?;
    let b = bind(&Iri::must("skiros:gripper1"));
    let imp = select_implementation(&reg, "actuate_gripper", &b, &runner.wm().snapshot()).map_err(|e| e.to_string())?;
    if imp.name != "actuate_gripper_robotiq" {
        return Err(format!("reversed sim library chose {}", imp.name));
    }
    Ok(format!(
        "{layouts} registration layouts: RobotiqGripper always gets grip_robotiq, generic always gets {}; sim manager picks actuate_gripper_robotiq",
        picked("plain")[0]
    ))
}
