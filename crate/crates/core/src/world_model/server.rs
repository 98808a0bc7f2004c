use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use super::{ChangeEvent, WmError, WmSnapshot, WorldModel};

struct Inner {
    model: WorldModel,
    subscribers: Vec<Sender<ChangeEvent>>,
}

/// Shared handle to one world model. All writes go through [`commit`],
/// which holds a single lock, so the version order is the commit order.
///
/// [`commit`]: WmServer::commit
#[derive(Clone)]
pub struct WmServer {
    inner: Arc<Mutex<Inner>>,
}

impl std::fmt::Debug for WmServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WmServer").field("version", &self.version()).finish()
    }
}

/// Ordered, gap-free stream of change events.
#[derive(Debug)]
pub struct Subscription {
    rx: Receiver<ChangeEvent>,
}

impl Subscription {
    pub fn recv(&self) -> Option<ChangeEvent> {
        self.rx.recv().ok()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<ChangeEvent, RecvTimeoutError> {
        self.rx.recv_timeout(timeout)
    }

    pub fn try_recv(&self) -> Result<ChangeEvent, TryRecvError> {
        self.rx.try_recv()
    }

    /// Everything delivered so far, without blocking.
    pub fn drain(&self) -> Vec<ChangeEvent> {
        self.rx.try_iter().collect()
    }
}

impl WmServer {
    pub fn new(model: WorldModel) -> Self {
        WmServer {
            inner: Arc::new(Mutex::new(Inner {
                model,
                subscribers: Vec::new(),
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> WmSnapshot {
        self.lock().model.snapshot()
    }

    pub fn version(&self) -> u64 {
        self.lock().model.version()
    }

    /// Runs a read-only closure against the model.
    pub fn read<T>(&self, f: impl FnOnce(&WorldModel) -> T) -> T {
        f(&self.lock().model)
    }

    /// Runs `f` as one serialized step and fans out the events it produced.
    pub fn commit<T>(
        &self,
        f: impl FnOnce(&mut WorldModel) -> Result<T, WmError>,
    ) -> Result<T, WmError> {
        let mut inner = self.lock();
        let before = inner.model.version();
        let out = f(&mut inner.model);
        if inner.model.version() > before {
            let events: Vec<ChangeEvent> = inner
                .model
                .history()
                .filter(|e| e.version > before)
                .cloned()
                .collect();
            inner
                .subscribers
                .retain(|tx| events.iter().all(|e| tx.send(e.clone()).is_ok()));
        }
        out
    }

    /// Replays events after `from`, then streams live ones. `None`
    /// subscribes at the current head.
    pub fn subscribe(&self, from: Option<u64>) -> Result<Subscription, WmError> {
        let mut inner = self.lock();
        let from = from.unwrap_or(inner.model.version());
        let backlog = inner.model.events_since(from)?;
        let (tx, rx) = mpsc::channel();
        for e in backlog {
            tx.send(e).expect("receiver alive");
        }
        inner.subscribers.push(tx);
        Ok(Subscription { rx })
    }
}
