//! Simulated mobile manipulation: timed drive, pick, place and gripper
//! primitives on a logical clock, with scripted world-model faults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{Catalog, ExecCtx, Primitive, Step};
use crate::ontology::{base_ontology, parse_turtle, vocab, Iri, RdfTerm};
use crate::planning::GoalLiteral;
use crate::skill::{parse_manifest, SkillLibrary};
use crate::skill_manager::{builtin, ManagerConfig, ManagerError, SkillManager, TaskInfo, DEFAULT_RATE};
use crate::task_manager::{Goal, MissionError, MissionInfo, TaskManager};
use crate::world_model::{WmError, WmServer, WorldModel};

pub const SCENE_TWO_WS: &str = include_str!("../../assets/scene_two_ws.ttl");
pub const SCENE_SINGLE_WS: &str = include_str!("../../assets/scene_single_ws.ttl");
pub const MANIFEST: &str = include_str!("../../assets/sim.toml");
pub const PICK_FAKE_MANIFEST: &str = include_str!("../../assets/pick_fake.toml");

/// Bundled scene by file name.
pub fn bundled_scene(name: &str) -> Option<&'static str> {
    match name {
        "scene_two_ws.ttl" => Some(SCENE_TWO_WS),
        "scene_single_ws.ttl" => Some(SCENE_SINGLE_WS),
        _ => None,
    }
}

/// drive, pick, place and actuate_gripper.
pub fn library() -> SkillLibrary {
    parse_manifest(MANIFEST).expect("bundled manifest parses")
}

/// The mockup `pick_fake` compound built from world-model primitives.
pub fn pick_fake_library() -> SkillLibrary {
    parse_manifest(PICK_FAKE_MANIFEST).expect("bundled manifest parses")
}

pub fn default_durations() -> BTreeMap<String, f64> {
    [("drive", 2.0), ("pick", 1.0), ("place", 1.0), ("actuate_gripper", 0.5)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

type Effect = fn(&mut ExecCtx<'_>) -> Result<(), String>;

/// Runs for a fixed span of clock time, then applies its effect.
struct Timed {
    duration: f64,
    started: Option<f64>,
    effect: Effect,
}

impl Primitive for Timed {
    fn on_start(&mut self, ctx: &mut ExecCtx<'_>) -> bool {
        self.started = Some(ctx.time);
        true
    }

    fn execute(&mut self, ctx: &mut ExecCtx<'_>) -> Step {
        let t0 = *self.started.get_or_insert(ctx.time);
        if ctx.time - t0 + 1e-9 < self.duration {
            return Step::Running;
        }
        match (self.effect)(ctx) {
            Ok(()) => Step::Success,
            Err(e) => Step::Failure(e),
        }
    }
}

fn drive(ctx: &mut ExecCtx<'_>) -> Result<(), String> {
    let robot = ctx.element("Robot")?;
    let target = ctx.element("TargetLocation")?;
    ctx.commit(|wm| wm.set_relation(&robot, &vocab::at(), &target, true))
        .map(|_| ())
        .map_err(|e| e.to_string())
}

fn transfer(ctx: &mut ExecCtx<'_>, to: Iri, gripper: Iri, state: &str) -> Result<(), String> {
    let object = ctx.element("Object")?;
    ctx.commit(|wm| {
        wm.move_element(&object, &to)?;
        wm.set_property(&gripper, &vocab::container_state(), vec![RdfTerm::Str(state.to_string())])
    })
    .map(|_| ())
    .map_err(|e| e.to_string())
}

fn pick(ctx: &mut ExecCtx<'_>) -> Result<(), String> {
    let gripper = ctx.element("Gripper")?;
    transfer(ctx, gripper.clone(), gripper, "Full")
}

fn place(ctx: &mut ExecCtx<'_>) -> Result<(), String> {
    let gripper = ctx.element("Gripper")?;
    let target = ctx.element("TargetLocation")?;
    transfer(ctx, target, gripper, "Empty")
}

fn actuate(ctx: &mut ExecCtx<'_>) -> Result<(), String> {
    let gripper = ctx.element("Gripper")?;
    let open = match ctx.param("OpeningState") {
        Some(crate::skill::Value::Bool(b)) => *b,
        _ => return Err("OpeningState is not a bool".into()),
    };
    ctx.commit(|wm| wm.set_property(&gripper, &Iri::must("skiros:OpeningState"), vec![RdfTerm::Bool(open)]))
        .map(|_| ())
        .map_err(|e| e.to_string())
}

/// Built-in primitives plus the simulated ones, timed by `durations`
/// (seconds per skill, falling back to [`default_durations`]).
pub fn catalog(durations: &BTreeMap<String, f64>) -> Catalog {
    let defaults = default_durations();
    let d = |k: &str| durations.get(k).or(defaults.get(k)).copied().unwrap_or(1.0);
    let mut c = builtin::catalog();
    let entries: [(&str, f64, Effect); 5] = [
        ("sim_drive", d("drive"), drive),
        ("sim_pick", d("pick"), pick),
        ("sim_place", d("place"), place),
        ("sim_gripper_generic", d("actuate_gripper"), actuate),
        ("sim_gripper_robotiq", d("actuate_gripper"), actuate),
    ];
    for (name, duration, effect) in entries {
        c.register(name, move || Timed {
            duration,
            started: None,
            effect,
        });
    }
    c
}

/// A scripted world-model mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FaultAction {
    SetRelation {
        subject: Iri,
        predicate: Iri,
        object: Iri,
        #[serde(default)]
        state: bool,
    },
    RemoveElement {
        element: Iri,
    },
    MoveElement {
        element: Iri,
        parent: Iri,
    },
    SetProperty {
        element: Iri,
        property: Iri,
        value: String,
    },
}

impl FaultAction {
    pub fn apply(&self, wm: &mut WorldModel) -> Result<u64, WmError> {
        match self {
            FaultAction::SetRelation {
                subject,
                predicate,
                object,
                state,
            } => wm.set_relation(subject, predicate, object, *state),
            FaultAction::RemoveElement { element } => wm.remove_element(element),
            FaultAction::MoveElement { element, parent } => wm.move_element(element, parent),
            FaultAction::SetProperty { element, property, value } => {
                wm.set_property(element, property, vec![RdfTerm::Str(value.clone())])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    /// Clock time in seconds; applied at the first tick at or after it.
    pub time: f64,
    #[serde(flatten)]
    pub action: FaultAction,
}

/// Scene plus the sidecar settings: durations, faults and tick rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    /// A bundled scene name or a path to a Turtle file.
    pub scene: String,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub durations: BTreeMap<String, f64>,
    #[serde(default, rename = "fault")]
    pub faults: Vec<Fault>,
    /// Load the `pick_fake` compound as an extra pick implementation.
    #[serde(default)]
    pub pick_fake: bool,
}

fn default_rate() -> f64 {
    DEFAULT_RATE
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Wm(#[from] WmError),
    #[error(transparent)]
    Manager(#[from] ManagerError),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error("fault at t={time}: {error}")]
    Fault { time: f64, error: WmError },
}

impl SimScenario {
    pub fn new(scene: &str) -> Self {
        SimScenario {
            scene: scene.to_string(),
            rate: DEFAULT_RATE,
            durations: BTreeMap::new(),
            faults: Vec::new(),
            pick_fake: false,
        }
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let s: SimScenario = toml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    /// Reads a sidecar file; a relative scene path is taken from its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
        let mut s = Self::parse(&text)?;
        if bundled_scene(&s.scene).is_none() {
            if let Some(dir) = path.parent() {
                s.scene = dir.join(&s.scene).to_string_lossy().into_owned();
            }
        }
        Ok(s)
    }

    pub fn check(&self) -> Result<(), SimError> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(SimError::Scenario(format!("rate must be positive, got {}", self.rate)));
        }
        if let Some((k, v)) = self.durations.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(SimError::Scenario(format!("duration of {k} must be positive, got {v}")));
        }
        Ok(())
    }

    pub fn scene_text(&self) -> Result<String, SimError> {
        match bundled_scene(&self.scene) {
            Some(t) => Ok(t.to_string()),
            None => std::fs::read_to_string(&self.scene).map_err(|e| SimError::Scenario(format!("{}: {e}", self.scene))),
        }
    }

    pub fn libraries(&self) -> Vec<SkillLibrary> {
        let mut libs = vec![builtin::library(), library()];
        if self.pick_fake {
            libs.push(pick_fake_library());
        }
        libs
    }
}

/// Runs a scenario in lock step: each tick applies due faults, advances
/// the task manager and then every skill manager.
pub struct SimRunner {
    wm: WmServer,
    tm: TaskManager,
    faults: Vec<Fault>,
    applied: usize,
    tick: u64,
    rate: f64,
}

impl SimRunner {
    /// Loads the scene and starts one manager per robot, named after the
    /// robot's local name.
    pub fn new(scenario: &SimScenario) -> Result<SimRunner, SimError> {
        scenario.check()?;
        let scene = parse_turtle(&scenario.scene_text()?).map_err(WmError::from)?;
        let wm = WmServer::new(WorldModel::with_scene(base_ontology(), &scene)?);
        let catalog = catalog(&scenario.durations);
        let libs = scenario.libraries();
        let snap = wm.snapshot();
        let mut managers = Vec::new();
        for robot in snap.instances_of(&vocab::robot()) {
            let cfg = ManagerConfig {
                name: robot.local().to_string(),
                robot,
                rate: scenario.rate,
            };
            managers.push(SkillManager::new(cfg, wm.clone(), &libs, catalog.clone())?);
        }
        let tm = TaskManager::new(wm.clone(), managers);
        Ok(Self::assemble(tm, scenario))
    }

    /// Drives an already wired task manager with the scenario's faults and
    /// rate.
    pub fn assemble(tm: TaskManager, scenario: &SimScenario) -> SimRunner {
        let mut faults = scenario.faults.clone();
        faults.sort_by(|a, b| a.time.total_cmp(&b.time));
        SimRunner {
            wm: tm.wm().clone(),
            tm,
            faults,
            applied: 0,
            tick: 0,
            rate: scenario.rate,
        }
    }

    pub fn wm(&self) -> &WmServer {
        &self.wm
    }

    pub fn task_manager(&self) -> &TaskManager {
        &self.tm
    }

    pub fn managers(&self) -> &[SkillManager] {
        self.tm.managers()
    }

    pub fn manager(&self, name: &str) -> Option<&SkillManager> {
        self.tm.manager(name)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Clock time of the last tick.
    pub fn time(&self) -> f64 {
        self.tick.saturating_sub(1) as f64 / self.rate
    }

    pub fn step(&mut self) -> Result<u64, SimError> {
        self.tick += 1;
        let now = self.time();
        while let Some(f) = self.faults.get(self.applied) {
            if f.time > now + 1e-9 {
                break;
            }
            let action = f.action.clone();
            self.wm
                .commit(|wm| action.apply(wm))
                .map_err(|error| SimError::Fault { time: f.time, error })?;
            self.applied += 1;
        }
        self.tm.step();
        for m in self.tm.managers() {
            m.step();
        }
        Ok(self.tick)
    }

    /// Submits the goal and steps until the mission ends or `max_ticks`
    /// pass.
    pub fn run_mission(&mut self, goal: Vec<GoalLiteral>, max_ticks: u64) -> Result<MissionInfo, SimError> {
        let id = self.tm.submit_goal(Goal::new(goal))?;
        for _ in 0..max_ticks {
            if self.tm.mission(&id)?.state.is_terminal() {
                break;
            }
            self.step()?;
        }
        Ok(self.tm.mission(&id)?)
    }

    /// Steps until the task on `manager` ends or `max_ticks` pass.
    pub fn run_task(&mut self, manager: &str, task: &str, max_ticks: u64) -> Result<TaskInfo, SimError> {
        let m = self
            .tm
            .manager(manager)
            .cloned()
            .ok_or_else(|| SimError::Scenario(format!("no manager {manager}")))?;
        for _ in 0..max_ticks {
            if m.task(task)?.state.is_terminal() {
                break;
            }
            self.step()?;
        }
        Ok(m.task(task)?)
    }
}
