//! Deployment config: one TOML file wiring the world model, the skill
//! managers, the task manager and the API listener.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rskill::ontology::Iri;
use rskill::sim::{bundled_scene, Fault, SimScenario};
use rskill::skill_manager::{ManagerConfig, DEFAULT_RATE};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";
pub const DEFAULT_HISTORY: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Bundled scene name or Turtle path, relative to the config file.
    #[serde(default = "default_scene")]
    pub scene: String,
    /// Extra ontology files merged into the base ontology.
    #[serde(default)]
    pub ontologies: Vec<PathBuf>,
    /// Extra skill manifests loaded by every manager.
    #[serde(default)]
    pub skills: Vec<PathBuf>,
    #[serde(default)]
    pub pick_fake: bool,
    /// Tick rate of the shared clock, Hz.
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Start the realtime clock on `serve`.
    #[serde(default = "yes")]
    pub realtime: bool,
    /// Event-stream history kept for resuming clients.
    #[serde(default = "default_history")]
    pub history: usize,
    #[serde(default)]
    pub durations: BTreeMap<String, f64>,
    /// Empty means one manager per `skiros:Robot` instance.
    #[serde(default, rename = "manager")]
    pub managers: Vec<ManagerEntry>,
    #[serde(default, rename = "fault")]
    pub faults: Vec<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManagerEntry {
    pub name: String,
    pub robot: Iri,
}

fn default_bind() -> String {
    DEFAULT_BIND.to_string()
}

fn default_scene() -> String {
    "scene_two_ws.ttl".to_string()
}

fn default_rate() -> f64 {
    DEFAULT_RATE
}

fn default_history() -> usize {
    DEFAULT_HISTORY
}

fn yes() -> bool {
    true
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        DeploymentConfig::for_scene(&default_scene())
    }
}

impl DeploymentConfig {
    pub fn for_scene(scene: &str) -> Self {
        DeploymentConfig {
            bind: default_bind(),
            scene: scene.to_string(),
            ontologies: Vec::new(),
            skills: Vec::new(),
            pick_fake: false,
            rate: DEFAULT_RATE,
            realtime: true,
            history: DEFAULT_HISTORY,
            durations: BTreeMap::new(),
            managers: Vec::new(),
            faults: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        let cfg: DeploymentConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        if bundled_scene(&cfg.scene).is_none() {
            cfg.scene = dir.join(&cfg.scene).to_string_lossy().into_owned();
        }
        for p in cfg.ontologies.iter_mut().chain(cfg.skills.iter_mut()) {
            *p = dir.join(&*p);
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ServiceError> {
        self.scenario().check().map_err(|e| ServiceError::Config(e.to_string()))?;
        if self.history == 0 {
            return Err(ServiceError::Config("history must be at least 1".into()));
        }
        let mut names: Vec<&str> = self.managers.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(ServiceError::Config(format!("manager name {} is used twice", w[0])));
        }
        Ok(())
    }

    pub fn scenario(&self) -> SimScenario {
        SimScenario {
            scene: self.scene.clone(),
            rate: self.rate,
            durations: self.durations.clone(),
            faults: self.faults.clone(),
            pick_fake: self.pick_fake,
        }
    }

    pub fn manager_configs(&self) -> Vec<ManagerConfig> {
        self.managers
            .iter()
            .map(|m| ManagerConfig {
                name: m.name.clone(),
                robot: m.robot.clone(),
                rate: self.rate,
            })
            .collect()
    }
}
