//! Goal-level entry point: plans against the world model, dispatches plan
//! steps to skill managers and replans on failure.

use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::Diagnostic;
use crate::ontology::Iri;
use crate::planning::{generate_domain, generate_problem, plan, GoalLiteral, Plan, PlanError, PlanStep, PlanningDomain};
use crate::skill::{Value, ROBOT_KEY};
use crate::skill_manager::{SkillManager, TaskState};
use crate::world_model::{WmServer, WmSnapshot};

/// Replanning attempts allowed per mission.
pub const REPLAN_BUDGET: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub literals: Vec<GoalLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester: Option<String>,
}

impl Goal {
    pub fn new(literals: Vec<GoalLiteral>) -> Self {
        Goal {
            literals,
            requester: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionState {
    Planning,
    Executing,
    Succeeded,
    Failed,
    Unsatisfiable,
}

impl MissionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, MissionState::Succeeded | MissionState::Failed | MissionState::Unsatisfiable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepState {
    Pending,
    Running,
    Succeeded,
    Failed,
}

/// Dispatch record of one plan step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub action: String,
    pub args: Vec<Iri>,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manager: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    pub state: StepState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionInfo {
    pub id: String,
    pub goal: Goal,
    /// World-model version the first plan was computed at.
    pub submitted_version: u64,
    pub state: MissionState,
    pub steps: Vec<StepRecord>,
    pub replans: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MissionEvent {
    Planned {
        mission: String,
        plan: Vec<String>,
        version: u64,
    },
    StepStarted {
        mission: String,
        step: usize,
        action: String,
        manager: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task: Option<String>,
    },
    StepFinished {
        mission: String,
        step: usize,
        state: StepState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Replanning {
        mission: String,
        attempt: u32,
        reason: String,
        version: u64,
    },
    MissionFinished {
        mission: String,
        state: MissionState,
        version: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error("no skill manager is registered")]
    NoManagers,
    #[error("unknown mission {0}")]
    UnknownMission(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

struct Mission {
    info: MissionInfo,
    domain: PlanningDomain,
    queue: VecDeque<PlanStep>,
    /// Index into `info.steps` with its manager, while a step runs.
    current: Option<(usize, usize)>,
}

#[derive(Default)]
struct Inner {
    next_id: u64,
    missions: Vec<Mission>,
    /// Robot to the mission currently using it.
    claims: BTreeMap<Iri, String>,
    subscribers: Vec<Sender<MissionEvent>>,
}

/// Shared handle; clones refer to the same missions.
#[derive(Clone)]
pub struct TaskManager {
    wm: WmServer,
    managers: Arc<Vec<SkillManager>>,
    inner: Arc<Mutex<Inner>>,
}

impl std::fmt::Debug for TaskManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskManager")
            .field("managers", &self.managers.iter().map(SkillManager::name).collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

fn compute_plan(managers: &[SkillManager], snap: &WmSnapshot, goal: &[GoalLiteral]) -> Result<(PlanningDomain, Plan), PlanError> {
    let pd = generate_domain(managers[0].registry(), snap);
    let problem = generate_problem(&pd, snap, goal)?;
    let p = plan(&pd.domain, &problem)?;
    Ok((pd, p))
}

impl Mission {
    fn enqueue(&mut self, pd: PlanningDomain, p: Plan, version: u64) -> MissionEvent {
        let summaries: Vec<String> = p.steps.iter().map(|s| pd.summary(s)).collect();
        self.domain = pd;
        self.queue = p.steps.into();
        MissionEvent::Planned {
            mission: self.info.id.clone(),
            plan: summaries,
            version,
        }
    }
}

impl TaskManager {
    pub fn new(wm: WmServer, managers: Vec<SkillManager>) -> Self {
        TaskManager {
            wm,
            managers: Arc::new(managers),
            inner: Arc::new(Mutex::new(Inner::default())),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn wm(&self) -> &WmServer {
        &self.wm
    }

    pub fn managers(&self) -> &[SkillManager] {
        &self.managers
    }

    pub fn manager(&self, name: &str) -> Option<&SkillManager> {
        self.managers.iter().find(|m| m.name() == name)
    }

    pub fn subscribe(&self) -> Receiver<MissionEvent> {
        let (tx, rx) = mpsc::channel();
        self.lock().subscribers.push(tx);
        rx
    }

    fn emit(inner: &mut Inner, events: Vec<MissionEvent>) {
        if events.is_empty() {
            return;
        }
        inner
            .subscribers
            .retain(|tx| events.iter().all(|e| tx.send(e.clone()).is_ok()));
    }

    /// Plans at the current world-model version and queues the mission.
    /// Unknown objects and unreachable goals yield an Unsatisfiable
    /// mission; malformed goals are rejected.
    pub fn submit_goal(&self, goal: Goal) -> Result<String, MissionError> {
        if self.managers.is_empty() {
            return Err(MissionError::NoManagers);
        }
        if goal.literals.is_empty() {
            return Err(PlanError::EmptyGoal.into());
        }
        let snap = self.wm.snapshot();
        let version = snap.version();
        let result = compute_plan(&self.managers, &snap, &goal.literals);
        let mut inner = self.lock();
        inner.next_id += 1;
        let id = format!("mission-{}", inner.next_id);
        let mut m = Mission {
            info: MissionInfo {
                id: id.clone(),
                goal,
                submitted_version: version,
                state: MissionState::Planning,
                steps: Vec::new(),
                replans: 0,
                reason: None,
                final_version: None,
            },
            domain: PlanningDomain::default(),
            queue: VecDeque::new(),
            current: None,
        };
        let mut events = Vec::new();
        match result {
            Ok((pd, p)) => {
                info!("{id}: planned {} steps", p.len());
                events.push(m.enqueue(pd, p, version));
                m.info.state = MissionState::Executing;
            }
            Err(e @ (PlanError::NoPlan | PlanError::UnknownObject(_) | PlanError::ResourceLimit(_))) => {
                m.info.state = MissionState::Unsatisfiable;
                m.info.reason = Some(e.to_string());
                m.info.final_version = Some(version);
                events.push(MissionEvent::MissionFinished {
                    mission: id.clone(),
                    state: MissionState::Unsatisfiable,
                    version,
                    reason: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e.into()),
        }
        inner.missions.push(m);
        Self::emit(&mut inner, events);
        drop(inner);
        self.step();
        Ok(id)
    }

    pub fn mission(&self, id: &str) -> Result<MissionInfo, MissionError> {
        self.lock()
            .missions
            .iter()
            .find(|m| m.info.id == id)
            .map(|m| m.info.clone())
            .ok_or_else(|| MissionError::UnknownMission(id.to_string()))
    }

    pub fn missions(&self) -> Vec<MissionInfo> {
        self.lock().missions.iter().map(|m| m.info.clone()).collect()
    }

    pub fn has_active(&self) -> bool {
        self.lock().missions.iter().any(|m| !m.info.state.is_terminal())
    }

    /// Advances every executing mission: collects finished steps,
    /// dispatches the next ones and replans after failures.
    pub fn step(&self) {
        let mut inner = self.lock();
        let mut events = Vec::new();
        let Inner { missions, claims, .. } = &mut *inner;
        for m in missions.iter_mut() {
            self.advance(m, claims, &mut events);
        }
        Self::emit(&mut inner, events);
    }

    fn finish(&self, m: &mut Mission, claims: &mut BTreeMap<Iri, String>, state: MissionState, reason: Option<String>, events: &mut Vec<MissionEvent>) {
        let version = self.wm.version();
        m.info.state = state;
        m.info.reason = reason.clone();
        m.info.final_version = Some(version);
        claims.retain(|_, v| *v != m.info.id);
        info!("{}: {:?}", m.info.id, state);
        events.push(MissionEvent::MissionFinished {
            mission: m.info.id.clone(),
            state,
            version,
            reason,
        });
    }

    fn replan(&self, m: &mut Mission, claims: &mut BTreeMap<Iri, String>, reason: String, events: &mut Vec<MissionEvent>) {
        if m.info.replans >= REPLAN_BUDGET {
            self.finish(m, claims, MissionState::Failed, Some(format!("replan budget spent; last failure: {reason}")), events);
            return;
        }
        m.info.replans += 1;
        let snap = self.wm.snapshot();
        warn!("{}: replanning ({reason})", m.info.id);
        events.push(MissionEvent::Replanning {
            mission: m.info.id.clone(),
            attempt: m.info.replans,
            reason: reason.clone(),
            version: snap.version(),
        });
        match compute_plan(&self.managers, &snap, &m.info.goal.literals) {
            Ok((pd, p)) => {
                events.push(m.enqueue(pd, p, snap.version()));
            }
            Err(e) => self.finish(m, claims, MissionState::Failed, Some(format!("{reason}; replanning: {e}")), events),
        }
    }

    fn route(&self, m: &Mission, step: &PlanStep) -> Result<(usize, BTreeMap<String, Value>), String> {
        let bindings = m.domain.step_bindings(step).map_err(|e| e.to_string())?;
        let idx = match bindings.get(ROBOT_KEY) {
            Some(r) => self
                .managers
                .iter()
                .position(|x| x.robot() == r)
                .ok_or_else(|| format!("no manager drives {r}"))?,
            None => 0,
        };
        Ok((idx, bindings.into_iter().map(|(k, v)| (k, Value::Element(v))).collect()))
    }

    fn advance(&self, m: &mut Mission, claims: &mut BTreeMap<Iri, String>, events: &mut Vec<MissionEvent>) {
        while m.info.state == MissionState::Executing {
            if let Some((si, mi)) = m.current {
                let task = m.info.steps[si].task.clone().unwrap_or_default();
                let info = self.managers[mi].task(&task);
                let (state, reason) = match info {
                    Ok(t) if !t.state.is_terminal() => return,
                    Ok(t) if t.state == TaskState::Succeeded => (StepState::Succeeded, None),
                    Ok(t) => (
                        StepState::Failed,
                        Some(t.diagnostic.as_ref().map_or_else(|| format!("{:?}", t.state), Diagnostic::to_string)),
                    ),
                    Err(e) => (StepState::Failed, Some(e.to_string())),
                };
                m.info.steps[si].state = state;
                m.current = None;
                events.push(MissionEvent::StepFinished {
                    mission: m.info.id.clone(),
                    step: si,
                    state,
                    reason: reason.clone(),
                });
                if let Some(r) = reason {
                    let r = format!("{} failed: {r}", m.info.steps[si].summary);
                    self.replan(m, claims, r, events);
                }
                continue;
            }
            let Some(step) = m.queue.front().cloned() else {
                let snap = self.wm.snapshot();
                if m.info.goal.literals.iter().all(|g| g.holds(&snap)) {
                    self.finish(m, claims, MissionState::Succeeded, None, events);
                } else {
                    self.replan(m, claims, "plan finished but the goal does not hold".into(), events);
                }
                continue;
            };
            let summary = m.domain.summary(&step);
            let routed = self.route(m, &step);
            if let Ok((mi, _)) = &routed {
                let robot = self.managers[*mi].robot().clone();
                match claims.get(&robot) {
                    Some(owner) if *owner != m.info.id => return,
                    _ => {
                        claims.insert(robot, m.info.id.clone());
                    }
                }
            }
            m.queue.pop_front();
            let si = m.info.steps.len();
            m.info.steps.push(StepRecord {
                index: si,
                action: step.action.clone(),
                args: step.args.clone(),
                summary: summary.clone(),
                manager: None,
                task: None,
                state: StepState::Pending,
            });
            let started = routed.and_then(|(mi, params)| {
                self.managers[mi]
                    .start_task(&step.action, params)
                    .map(|t| (mi, t))
                    .map_err(|e| e.to_string())
            });
            match started {
                Ok((mi, t)) => {
                    let rec = &mut m.info.steps[si];
                    rec.manager = Some(self.managers[mi].name().to_string());
                    rec.task = Some(t.id.clone());
                    rec.state = StepState::Running;
                    m.current = Some((si, mi));
                    events.push(MissionEvent::StepStarted {
                        mission: m.info.id.clone(),
                        step: si,
                        action: step.action.clone(),
                        manager: self.managers[mi].name().to_string(),
                        task: Some(t.id),
                    });
                }
                Err(e) => {
                    m.info.steps[si].state = StepState::Failed;
                    events.push(MissionEvent::StepFinished {
                        mission: m.info.id.clone(),
                        step: si,
                        state: StepState::Failed,
                        reason: Some(e.clone()),
                    });
                    self.replan(m, claims, format!("{summary} could not start: {e}"), events);
                }
            }
        }
    }
}
