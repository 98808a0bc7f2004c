use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::ontology::Iri;
use crate::skill::{Bindings, Blackboard, Scope, Value};
use crate::world_model::{WmError, WmServer, WorldModel, WmSnapshot};

/// Outcome of one `execute` call.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Success,
    Running,
    Failure(String),
}

/// Execution context handed to primitive hooks.
pub struct ExecCtx<'a> {
    pub(crate) params: &'a Bindings,
    pub(crate) wm: &'a WmServer,
    pub(crate) snapshot: &'a mut WmSnapshot,
    pub(crate) bb: &'a mut Blackboard,
    pub(crate) scope: &'a Scope,
    /// 1-based tick index of the owning manager's clock.
    pub tick: u64,
    /// Clock time of this tick in seconds.
    pub time: f64,
    /// Tick period in seconds.
    pub dt: f64,
}

impl ExecCtx<'_> {
    pub fn params(&self) -> &Bindings {
        self.params
    }

    pub fn param(&self, key: &str) -> Option<&Value> {
        self.params.get(key)
    }

    pub fn element(&self, key: &str) -> Result<Iri, String> {
        match self.params.get(key) {
            Some(Value::Element(i)) => Ok(i.clone()),
            Some(v) => Err(format!("{key} is {v}, not an element")),
            None => Err(format!("{key} is not bound")),
        }
    }

    pub fn float(&self, key: &str) -> Result<f64, String> {
        self.params
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| format!("{key} is not a number"))
    }

    /// World-model view including this task's own commits so far.
    pub fn snapshot(&self) -> &WmSnapshot {
        self.snapshot
    }

    /// Commits through the shared world model and refreshes the snapshot.
    pub fn commit<T>(&mut self, f: impl FnOnce(&mut WorldModel) -> Result<T, WmError>) -> Result<T, WmError> {
        let out = self.wm.commit(f);
        *self.snapshot = self.wm.snapshot();
        out
    }

    /// Publishes an output value on the blackboard.
    pub fn set_output(&mut self, key: &str, v: Value) {
        self.bb.set(self.scope, key, v);
    }
}

/// An atomic skill. Hooks are called in the order `on_start`, `execute`
/// one or more times, then `on_end` after a terminal `execute`, or
/// `on_preempt` followed by `on_end` when stopped.
pub trait Primitive: Send {
    /// Called once when the library is loaded; returning `false` drops the
    /// primitive from the registry.
    fn on_init(&mut self) -> bool {
        true
    }

    /// Checks parameters before the first tick.
    fn validate(&self, _params: &Bindings) -> Result<(), String> {
        Ok(())
    }

    fn on_start(&mut self, _ctx: &mut ExecCtx<'_>) -> bool {
        true
    }

    fn execute(&mut self, ctx: &mut ExecCtx<'_>) -> Step;

    fn on_preempt(&mut self, _ctx: &mut ExecCtx<'_>) -> bool {
        true
    }

    fn on_end(&mut self, _ctx: &mut ExecCtx<'_>) -> bool {
        true
    }
}

pub type Factory = Arc<dyn Fn() -> Box<dyn Primitive> + Send + Sync>;

/// Named primitive factories that manifests refer to.
#[derive(Clone, Default)]
pub struct Catalog {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.factories.keys()).finish()
    }
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn insert(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn register<P: Primitive + 'static>(&mut self, name: &str, make: impl Fn() -> P + Send + Sync + 'static) {
        self.insert(name, Arc::new(move || Box::new(make()) as Box<dyn Primitive>));
    }

    pub fn get(&self, name: &str) -> Option<&Factory> {
        self.factories.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn extend(&mut self, other: &Catalog) {
        for (k, v) in &other.factories {
            self.factories.insert(k.clone(), v.clone());
        }
    }
}
