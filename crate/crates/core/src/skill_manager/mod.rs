//! Per-robot runtime: loads skill libraries, publishes them in the world
//! model and ticks tasks.

pub mod builtin;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{
    instantiate_skill, BtError, BtNode, Catalog, Diagnostic, NodeDump, NodeState, TickCtx, TranscriptEntry,
};
use crate::ontology::{vocab, Iri, RdfTerm};
use crate::skill::{
    complete_bindings, Bindings, Blackboard, ImplBody, ParamType, Registry, Scope, SkillDescription, SkillError,
    SkillLibrary, Value, ROBOT_KEY,
};
use crate::world_model::{ElementPatch, NewElement, WmError, WmServer, WmSnapshot};

pub const DEFAULT_RATE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagerConfig {
    pub name: String,
    pub robot: Iri,
    #[serde(default = "default_rate")]
    pub rate: f64,
}

fn default_rate() -> f64 {
    DEFAULT_RATE
}

impl ManagerConfig {
    pub fn new(name: &str, robot: Iri) -> Self {
        ManagerConfig {
            name: name.to_string(),
            robot,
            rate: DEFAULT_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManagerError {
    #[error("invalid manager config: {0}")]
    InvalidConfig(String),
    #[error("robot {0} is not in the world model")]
    UnknownRobot(Iri),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("{element} is in use by task {task}")]
    ResourceBusy { element: Iri, task: String },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Wm(#[from] WmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Running,
    Succeeded,
    Failed,
    Preempted,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Succeeded | TaskState::Failed | TaskState::Preempted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub id: String,
    pub skill: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<String>,
    pub state: TaskState,
    pub bindings: Bindings,
    /// Manager tick at which the task was created.
    pub created: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ManagerEvent {
    TaskStarted {
        manager: String,
        task: String,
        skill: String,
        bindings: Bindings,
        tick: u64,
    },
    NodeChanged {
        manager: String,
        task: String,
        #[serde(flatten)]
        entry: TranscriptEntry,
    },
    TaskFinished {
        manager: String,
        task: String,
        state: TaskState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagnostic: Option<Diagnostic>,
        tick: u64,
    },
}

struct Task {
    info: TaskInfo,
    root: BtNode,
    bb: Blackboard,
    transcript: Vec<TranscriptEntry>,
    resources: Vec<Iri>,
}

#[derive(Default)]
struct Inner {
    tick: u64,
    next_id: u64,
    tasks: Vec<Task>,
    subscribers: Vec<Sender<ManagerEvent>>,
}

impl Inner {
    fn emit(&mut self, events: Vec<ManagerEvent>) {
        if events.is_empty() {
            return;
        }
        self.subscribers
            .retain(|tx| events.iter().all(|e| tx.send(e.clone()).is_ok()));
    }

    fn task_mut(&mut self, id: &str) -> Result<&mut Task, ManagerError> {
        self.tasks
            .iter_mut()
            .find(|t| t.info.id == id)
            .ok_or_else(|| ManagerError::UnknownTask(id.to_string()))
    }
}

/// Answer to a successful start, echoing the completed bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartedTask {
    pub id: String,
    pub implementation: String,
    pub bindings: Bindings,
}

/// One robot's skill runtime. Clones share state.
#[derive(Clone)]
pub struct SkillManager {
    cfg: Arc<ManagerConfig>,
    wm: WmServer,
    registry: Arc<Registry>,
    catalog: Arc<Catalog>,
    diagnostics: Arc<Vec<String>>,
    inner: Arc<Mutex<Inner>>,
}

impl std::fmt::Debug for SkillManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SkillManager").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

fn skill_element_id(robot: &Iri, skill: &str) -> Iri {
    Iri::must(&format!("skiros:{}-{}", robot.local(), skill.replace('_', "-")))
}

fn skill_properties(d: &SkillDescription) -> BTreeMap<Iri, Vec<RdfTerm>> {
    let strs = |it: Vec<String>| it.into_iter().map(RdfTerm::Str).collect::<Vec<_>>();
    let mut props = BTreeMap::new();
    props.insert(Iri::must("skiros:SkillName"), vec![RdfTerm::Str(d.name.clone())]);
    let params = d
        .params
        .iter()
        .map(|p| format!("{}:{}:{}", p.key, p.ty, p.flavor.name()))
        .collect();
    props.insert(Iri::must("skiros:hasParam"), strs(params));
    let names = |v: &[crate::skill::ConditionSpec]| strs(v.iter().map(|c| c.name().to_string()).collect());
    props.insert(Iri::must("skiros:hasPreCondition"), names(&d.pre));
    props.insert(Iri::must("skiros:hasHoldCondition"), names(&d.hold));
    props.insert(Iri::must("skiros:hasPostCondition"), names(&d.post));
    props.retain(|_, v| !v.is_empty());
    props
}

fn is_instance(wm: &WmSnapshot, e: &Iri, concept: &Iri) -> bool {
    wm.element_type(e).is_some_and(|t| wm.graph().is_subclass_of(&t, concept))
}

impl SkillManager {
    /// Loads the libraries against the world model ontology, drops
    /// primitives whose `on_init` refuses and registers each remaining
    /// skill as a `skiros:Skill` element owned by the robot.
    pub fn new(
        cfg: ManagerConfig,
        wm: WmServer,
        libraries: &[SkillLibrary],
        catalog: Catalog,
    ) -> Result<SkillManager, ManagerError> {
        if !(cfg.rate.is_finite() && cfg.rate > 0.0) {
            return Err(ManagerError::InvalidConfig(format!("tick rate must be positive, got {}", cfg.rate)));
        }
        if cfg.name.is_empty() {
            return Err(ManagerError::InvalidConfig("manager name is empty".into()));
        }
        let snap = wm.snapshot();
        if !snap.exists(&cfg.robot) {
            return Err(ManagerError::UnknownRobot(cfg.robot.clone()));
        }
        let mut registry = Registry::build(libraries, snap.graph())?;
        let mut diagnostics = Vec::new();
        let primitives: Vec<(String, String, String)> = registry
            .implementations()
            .filter_map(|i| match &i.body {
                ImplBody::Primitive { factory } => Some((i.name.clone(), i.implements.clone(), factory.clone())),
                ImplBody::Compound { .. } => None,
            })
            .collect();
        for (name, skill, factory) in primitives {
            let ok = match catalog.get(&factory) {
                Some(f) => f().on_init(),
                None => {
                    diagnostics.push(format!("{name}: no primitive factory {factory}"));
                    registry.remove_implementation(&name);
                    continue;
                }
            };
            if !ok {
                warn!("primitive {name} of {skill} refused to initialise; not loaded");
                diagnostics.push(format!("{name}: on_init returned false"));
                registry.remove_implementation(&name);
            }
        }
        let m = SkillManager {
            cfg: Arc::new(cfg),
            wm,
            registry: Arc::new(registry),
            catalog: Arc::new(catalog),
            diagnostics: Arc::new(diagnostics),
            inner: Arc::new(Mutex::new(Inner::default())),
        };
        m.register_skills()?;
        Ok(m)
    }

    /// Writes the skill elements; existing identical elements are left
    /// alone so reloading does not change the world model.
    fn register_skills(&self) -> Result<(), ManagerError> {
        let robot = self.cfg.robot.clone();
        for d in self.registry.descriptions() {
            let id = skill_element_id(&robot, &d.name);
            let props = skill_properties(d);
            let snap = self.wm.snapshot();
            match snap.element(&id) {
                None => {
                    let e = NewElement {
                        kind: Some(vocab::skill()),
                        label: Some(d.name.clone()),
                        properties: props,
                        ..Default::default()
                    };
                    self.wm.commit(|wm| wm.add_element_with_id(id.clone(), e))?;
                }
                Some(e) => {
                    let sorted = |v: &[RdfTerm]| {
                        let mut v: Vec<String> = v.iter().map(RdfTerm::to_turtle).collect();
                        v.sort();
                        v
                    };
                    let stale = props
                        .iter()
                        .any(|(k, v)| e.properties.get(k).map(|x| sorted(x)) != Some(sorted(v)));
                    if stale {
                        let patch = ElementPatch {
                            properties: props,
                            ..Default::default()
                        };
                        self.wm.commit(|wm| wm.update_element(&id, patch))?;
                    }
                }
            }
            if !self.wm.snapshot().has_relation(&robot, &vocab::has_skill(), &id) {
                self.wm
                    .commit(|wm| wm.set_relation(&robot, &vocab::has_skill(), &id, true))?;
            }
        }
        info!("manager {} loaded {} skills", self.cfg.name, self.registry.descriptions().count());
        Ok(())
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn config(&self) -> &ManagerConfig {
        &self.cfg
    }

    pub fn name(&self) -> &str {
        &self.cfg.name
    }

    pub fn robot(&self) -> &Iri {
        &self.cfg.robot
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn wm(&self) -> &WmServer {
        &self.wm
    }

    /// Load problems, such as primitives dropped by `on_init`.
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// World-model id of a registered skill.
    pub fn skill_element(&self, skill: &str) -> Iri {
        skill_element_id(&self.cfg.robot, skill)
    }

    /// Current clock tick; 0 before the first step.
    pub fn tick(&self) -> u64 {
        self.lock().tick
    }

    pub fn subscribe(&self) -> Receiver<ManagerEvent> {
        let (tx, rx) = mpsc::channel();
        self.lock().subscribers.push(tx);
        rx
    }

    /// Completes the bindings and creates a running task. Element values
    /// may be given as `"prefix:local"` strings.
    pub fn start_task(&self, skill: &str, params: BTreeMap<String, Value>) -> Result<StartedTask, ManagerError> {
        let d = self
            .registry
            .description(skill)
            .ok_or_else(|| SkillError::UnknownSkill(skill.to_string()))?;
        let mut b = Bindings::new();
        for (k, v) in params {
            if k == ROBOT_KEY && d.param(&k).is_none() {
                let v = v
                    .coerce(&ParamType::ElementOf(vocab::robot()))
                    .map_err(|e| ManagerError::InvalidParameters(format!("{k}: {e}")))?;
                if v.as_element() != Some(&self.cfg.robot) {
                    return Err(ManagerError::InvalidParameters(format!(
                        "{k} is {v} but this manager drives {}",
                        self.cfg.robot
                    )));
                }
                continue;
            }
            let p = d
                .param(&k)
                .ok_or_else(|| ManagerError::InvalidParameters(format!("{skill} has no parameter {k}")))?;
            let v = v
                .coerce(&p.ty)
                .map_err(|e| ManagerError::InvalidParameters(format!("{k}: {e}")))?;
            b.insert(k, v);
        }
        b.entry(ROBOT_KEY.to_string())
            .or_insert_with(|| Value::Element(self.cfg.robot.clone()));
        for p in &d.params {
            if let Some(def) = &p.default {
                b.entry(p.key.clone()).or_insert_with(|| def.clone());
            }
        }
        let snap = self.wm.snapshot();
        let bindings = complete_bindings(d, &b, &snap)?;
        let bb = Blackboard::new(bindings.clone());
        let root = instantiate_skill(&self.registry, &self.catalog, &snap, &bb, &Scope::root(), skill, None)?;
        let implementation = root.implementation().unwrap_or_default().to_string();
        if let Some(ImplBody::Primitive { factory }) = self.registry.implementation(&implementation).map(|i| &i.body) {
            if let Some(f) = self.catalog.get(factory) {
                f().validate(&bindings).map_err(ManagerError::InvalidParameters)?;
            }
        }
        let resources: Vec<Iri> = bindings
            .values()
            .filter_map(Value::as_element)
            .filter(|e| is_instance(&snap, e, &vocab::arm_device()) || is_instance(&snap, e, &vocab::gripper_effector()))
            .cloned()
            .collect();
        let mut inner = self.lock();
        for t in inner.tasks.iter().filter(|t| t.info.state == TaskState::Running) {
            if let Some(e) = resources.iter().find(|e| t.resources.contains(e)) {
                return Err(ManagerError::ResourceBusy {
                    element: e.clone(),
                    task: t.info.id.clone(),
                });
            }
        }
        inner.next_id += 1;
        let id = format!("{}-{}", self.cfg.name, inner.next_id);
        let tick = inner.tick;
        inner.tasks.push(Task {
            info: TaskInfo {
                id: id.clone(),
                skill: skill.to_string(),
                implementation: Some(implementation.clone()),
                state: TaskState::Running,
                bindings: bindings.clone(),
                created: tick,
                finished: None,
                diagnostic: None,
            },
            root,
            bb,
            transcript: Vec::new(),
            resources,
        });
        inner.emit(vec![ManagerEvent::TaskStarted {
            manager: self.cfg.name.clone(),
            task: id.clone(),
            skill: skill.to_string(),
            bindings: bindings.clone(),
            tick,
        }]);
        Ok(StartedTask {
            id,
            implementation,
            bindings,
        })
    }

    /// Preempts a running task. Terminal tasks are left untouched.
    pub fn stop_task(&self, id: &str) -> Result<TaskState, ManagerError> {
        let mut inner = self.lock();
        let tick = inner.tick;
        let manager = self.cfg.name.clone();
        let t = inner.task_mut(id)?;
        if t.info.state != TaskState::Running {
            return Ok(t.info.state);
        }
        let before = t.transcript.len();
        {
            let mut ctx = TickCtx::new(&self.wm, &mut t.bb, tick.max(1), self.cfg.rate).with_transcript(&mut t.transcript);
            t.root.preempt(&mut ctx);
        }
        t.info.state = TaskState::Preempted;
        t.info.finished = Some(tick);
        t.info.diagnostic = Some(Diagnostic::Preempted);
        let mut events: Vec<ManagerEvent> = t.transcript[before..]
            .iter()
            .map(|e| ManagerEvent::NodeChanged {
                manager: manager.clone(),
                task: id.to_string(),
                entry: e.clone(),
            })
            .collect();
        events.push(ManagerEvent::TaskFinished {
            manager,
            task: id.to_string(),
            state: TaskState::Preempted,
            diagnostic: Some(Diagnostic::Preempted),
            tick,
        });
        inner.emit(events);
        Ok(TaskState::Preempted)
    }

    /// Advances the clock by one tick and ticks every running task once.
    pub fn step(&self) -> u64 {
        let mut inner = self.lock();
        inner.tick += 1;
        let tick = inner.tick;
        let mut events = Vec::new();
        for t in inner.tasks.iter_mut().filter(|t| t.info.state == TaskState::Running) {
            let before = t.transcript.len();
            let state = {
                let mut ctx = TickCtx::new(&self.wm, &mut t.bb, tick, self.cfg.rate).with_transcript(&mut t.transcript);
                t.root.tick(&mut ctx)
            };
            for e in &t.transcript[before..] {
                events.push(ManagerEvent::NodeChanged {
                    manager: self.cfg.name.clone(),
                    task: t.info.id.clone(),
                    entry: e.clone(),
                });
            }
            let done = match state {
                NodeState::Running => continue,
                NodeState::Success => TaskState::Succeeded,
                NodeState::Failure => TaskState::Failed,
            };
            t.info.state = done;
            t.info.finished = Some(tick);
            t.info.diagnostic = t.root.diagnostic().cloned();
            events.push(ManagerEvent::TaskFinished {
                manager: self.cfg.name.clone(),
                task: t.info.id.clone(),
                state: done,
                diagnostic: t.info.diagnostic.clone(),
                tick,
            });
        }
        inner.emit(events);
        tick
    }

    pub fn task(&self, id: &str) -> Result<TaskInfo, ManagerError> {
        let mut inner = self.lock();
        Ok(inner.task_mut(id)?.info.clone())
    }

    pub fn tasks(&self) -> Vec<TaskInfo> {
        self.lock().tasks.iter().map(|t| t.info.clone()).collect()
    }

    /// Ordered node-state changes of a task.
    pub fn transcript(&self, id: &str) -> Result<Vec<TranscriptEntry>, ManagerError> {
        let mut inner = self.lock();
        Ok(inner.task_mut(id)?.transcript.clone())
    }

    pub fn dump(&self, id: &str) -> Result<NodeDump, ManagerError> {
        let mut inner = self.lock();
        Ok(inner.task_mut(id)?.root.dump())
    }

    pub fn has_running(&self) -> bool {
        self.lock().tasks.iter().any(|t| t.info.state == TaskState::Running)
    }

    /// Steps until the task is terminal or `max_ticks` have passed.
    pub fn run_task(&self, id: &str, max_ticks: u64) -> Result<TaskInfo, ManagerError> {
        for _ in 0..max_ticks {
            let info = self.task(id)?;
            if info.state.is_terminal() {
                return Ok(info);
            }
            self.step();
        }
        self.task(id)
    }

    /// Ticks this manager on a background thread at the configured rate
    /// until the handle is dropped.
    pub fn spawn_driver(&self) -> Driver {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let me = self.clone();
        let period = Duration::from_secs_f64(1.0 / self.cfg.rate);
        let handle = std::thread::spawn(move || {
            let mut next = Instant::now();
            while !flag.load(Ordering::Relaxed) {
                me.step();
                next += period;
                let now = Instant::now();
                if next > now {
                    std::thread::sleep(next - now);
                } else {
                    next = now;
                }
            }
        });
        Driver {
            stop,
            handle: Some(handle),
        }
    }
}

/// Background tick loop; stops when dropped.
pub struct Driver {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Driver {
    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Driver {
    fn drop(&mut self) {
        self.halt();
    }
}
