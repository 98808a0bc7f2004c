use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rskill::ontology::{base_ontology, parse_turtle, vocab, Graph, Iri};
use rskill::sim::{self, SimRunner};
use rskill::skill::{parse_manifest, SkillLibrary};
use rskill::skill_manager::{ManagerConfig, SkillManager};
use rskill::task_manager::TaskManager;
use rskill::world_model::{WmServer, WorldModel};

use crate::config::DeploymentConfig;
use crate::events::{EventHub, EventPayload};
use crate::ServiceError;

/// Base ontology plus the config's extra ontology files.
pub fn load_ontology(cfg: &DeploymentConfig) -> Result<Graph, ServiceError> {
    let mut g = base_ontology();
    for p in &cfg.ontologies {
        let text = std::fs::read_to_string(p).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
        let extra = parse_turtle(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
        g.merge(&extra).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
    }
    Ok(g)
}

/// Bundled libraries plus the config's extra manifests.
pub fn load_libraries(cfg: &DeploymentConfig) -> Result<Vec<SkillLibrary>, ServiceError> {
    let mut libs = cfg.scenario().libraries();
    for p in &cfg.skills {
        let text = std::fs::read_to_string(p).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
        libs.push(parse_manifest(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?);
    }
    Ok(libs)
}

/// A running world model, its skill managers and the task manager, with
/// the merged event stream and an optional realtime clock.
pub struct Deployment {
    config: DeploymentConfig,
    tm: TaskManager,
    hub: EventHub,
    runner: Arc<Mutex<SimRunner>>,
    clock: Mutex<Option<Clock>>,
}

impl std::fmt::Debug for Deployment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Deployment")
            .field("bind", &self.config.bind)
            .field("managers", &self.tm.managers())
            .finish()
    }
}

impl Deployment {
    pub fn build(cfg: &DeploymentConfig) -> Result<Deployment, ServiceError> {
        cfg.check()?;
        let scenario = cfg.scenario();
        let scene = parse_turtle(&scenario.scene_text()?).map_err(|e| ServiceError::Config(format!("{}: {e}", cfg.scene)))?;
        let model = WorldModel::with_scene(load_ontology(cfg)?, &scene)?;
        let wm = WmServer::new(model);
        let libs = load_libraries(cfg)?;
        let catalog = sim::catalog(&cfg.durations);
        let mut configs = cfg.manager_configs();
        if configs.is_empty() {
            configs = wm
                .snapshot()
                .instances_of(&vocab::robot())
                .into_iter()
                .map(|robot| ManagerConfig {
                    name: robot.local().to_string(),
                    robot,
                    rate: cfg.rate,
                })
                .collect();
        }
        let mut managers = Vec::new();
        for c in configs {
            let m = SkillManager::new(c, wm.clone(), &libs, catalog.clone())?;
            for d in m.diagnostics() {
                log::warn!("{}: {d}", m.name());
            }
            managers.push(m);
        }
        let tm = TaskManager::new(wm.clone(), managers);
        let hub = EventHub::new(cfg.history);
        let sub = wm.subscribe(None)?;
        hub.pump("wm", move || sub.recv(), EventPayload::WmChange);
        for m in tm.managers() {
            let rx = m.subscribe();
            hub.pump(m.name(), move || rx.recv().ok(), EventPayload::TaskUpdate);
        }
        let rx = tm.subscribe();
        hub.pump("missions", move || rx.recv().ok(), EventPayload::MissionUpdate);
        let runner = SimRunner::assemble(tm.clone(), &scenario);
        Ok(Deployment {
            config: cfg.clone(),
            tm,
            hub,
            runner: Arc::new(Mutex::new(runner)),
            clock: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &DeploymentConfig {
        &self.config
    }

    pub fn wm(&self) -> &WmServer {
        self.tm.wm()
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

    pub fn manager_for_robot(&self, robot: &Iri) -> Option<&SkillManager> {
        self.managers().iter().find(|m| m.robot() == robot)
    }

    /// The manager that issued the task id.
    pub fn manager_for_task(&self, id: &str) -> Option<&SkillManager> {
        self.managers().iter().find(|m| m.task(id).is_ok())
    }

    pub fn hub(&self) -> &EventHub {
        &self.hub
    }

    fn runner(&self) -> MutexGuard<'_, SimRunner> {
        self.runner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Advances the shared clock by one tick.
    pub fn step(&self) -> Result<u64, ServiceError> {
        Ok(self.runner().step()?)
    }

    pub fn tick(&self) -> u64 {
        self.runner().tick()
    }

    pub fn time(&self) -> f64 {
        self.runner().time()
    }

    pub fn clock_running(&self) -> bool {
        self.clock.lock().unwrap_or_else(|e| e.into_inner()).is_some()
    }

    /// Starts ticking at the configured rate on a background thread.
    pub fn start_clock(&self) {
        let mut slot = self.clock.lock().unwrap_or_else(|e| e.into_inner());
        if slot.is_none() {
            *slot = Some(Clock::spawn(self.runner.clone(), self.config.rate));
        }
    }

    pub fn stop_clock(&self) {
        let clock = self.clock.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(c) = clock {
            c.stop();
        }
    }

    /// Waits until the event stream has caught up with `seq` or the timeout
    /// passes.
    pub fn wait_for_events(&self, seq: u64, timeout: Duration) -> bool {
        let end = Instant::now() + timeout;
        while self.hub.head() < seq {
            if Instant::now() > end {
                return false;
            }
            std::thread::sleep(Duration::from_millis(1));
        }
        true
    }
}

impl Drop for Deployment {
    fn drop(&mut self) {
        self.stop_clock();
    }
}

struct Clock {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Clock {
    fn spawn(runner: Arc<Mutex<SimRunner>>, rate: f64) -> Clock {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let period = Duration::from_secs_f64(1.0 / rate);
        let handle = std::thread::Builder::new()
            .name("clock".into())
            .spawn(move || {
                let mut next = Instant::now();
                while !flag.load(Ordering::Relaxed) {
                    let result = runner.lock().unwrap_or_else(|e| e.into_inner()).step();
                    if let Err(e) = result {
                        log::error!("tick failed: {e}");
                    }
                    next += period;
                    let now = Instant::now();
                    if next > now {
                        std::thread::sleep(next - now);
                    } else {
                        next = now;
                    }
                }
            })
            .expect("spawn clock thread");
        Clock {
            stop,
            handle: Some(handle),
        }
    }

    fn stop(mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
