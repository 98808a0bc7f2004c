use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{SkillError, Value};

/// Per-node parameter overlay: constants that shadow the shared value and
/// aliases into the enclosing scope.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub specify: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub remap: BTreeMap<String, String>,
}

impl Overlay {
    pub fn is_empty(&self) -> bool {
        self.specify.is_empty() && self.remap.is_empty()
    }

    pub fn specify(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.specify.insert(key.to_string(), v.into());
        self
    }

    pub fn remap(mut self, key: &str, target: &str) -> Self {
        self.remap.insert(key.to_string(), target.to_string());
        self
    }
}

/// Chain of overlays from a node up to the task root.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    frames: Option<Arc<Frame>>,
}

#[derive(Debug)]
struct Frame {
    overlay: Overlay,
    parent: Scope,
}

impl Scope {
    pub fn root() -> Self {
        Scope::default()
    }

    /// Child scope seen by a node carrying `overlay`.
    pub fn child(&self, overlay: Overlay) -> Scope {
        if overlay.is_empty() {
            return self.clone();
        }
        Scope {
            frames: Some(Arc::new(Frame {
                overlay,
                parent: self.clone(),
            })),
        }
    }

    /// The shared-map key `key` ends up at, or the specified constant.
    fn locate(&self, key: &str) -> Result<String, Value> {
        let mut key = key.to_string();
        let mut cur = self;
        while let Some(f) = &cur.frames {
            if let Some(v) = f.overlay.specify.get(&key) {
                return Err(v.clone());
            }
            if let Some(target) = f.overlay.remap.get(&key) {
                key = target.clone();
            }
            cur = &f.parent;
        }
        Ok(key)
    }
}

/// Task-scoped parameter store shared by every node of one tree.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Blackboard {
    shared: BTreeMap<String, Value>,
}

impl Blackboard {
    pub fn new(shared: BTreeMap<String, Value>) -> Self {
        Blackboard { shared }
    }

    pub fn shared(&self) -> &BTreeMap<String, Value> {
        &self.shared
    }

    /// Resolves `key` as seen from `scope`: specify, then remap, then the
    /// shared map.
    pub fn get(&self, scope: &Scope, key: &str) -> Result<Value, SkillError> {
        match scope.locate(key) {
            Err(v) => Ok(v),
            Ok(k) => self
                .shared
                .get(&k)
                .cloned()
                .ok_or_else(|| SkillError::UnboundParameter(key.to_string())),
        }
    }

    pub fn try_get(&self, scope: &Scope, key: &str) -> Option<Value> {
        self.get(scope, key).ok()
    }

    /// Writes through remaps. Writes to specified keys stay local and are
    /// dropped.
    pub fn set(&mut self, scope: &Scope, key: &str, v: Value) {
        if let Ok(k) = scope.locate(key) {
            self.shared.insert(k, v);
        }
    }
}

/// Resolves one key through a single overlay over a shared map.
pub fn resolve_key(
    bb: &Blackboard,
    overlay: &Overlay,
    key: &str,
) -> Result<Value, SkillError> {
    bb.get(&Scope::root().child(overlay.clone()), key)
}
