//! Sequenced event stream shared by every API client.
//!
//! World-model changes, manager events and mission events are merged into
//! one log with strictly increasing sequence numbers. The log keeps a
//! bounded history so a client reconnecting with its last sequence number
//! picks up exactly where it left off.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use rskill::skill_manager::ManagerEvent;
use rskill::task_manager::MissionEvent;
use rskill::world_model::ChangeEvent;
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "event", rename_all = "snake_case")]
pub enum EventPayload {
    WmChange(ChangeEvent),
    TaskUpdate(ManagerEvent),
    MissionUpdate(MissionEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncated {
    pub requested: u64,
    pub oldest: u64,
}

struct Log {
    events: VecDeque<ApiEvent>,
    next: u64,
}

#[derive(Clone)]
pub struct EventHub {
    log: Arc<Mutex<Log>>,
    head: watch::Sender<u64>,
    horizon: usize,
}

impl std::fmt::Debug for EventHub {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventHub").field("head", &self.head()).finish()
    }
}

impl EventHub {
    pub fn new(horizon: usize) -> Self {
        EventHub {
            log: Arc::new(Mutex::new(Log {
                events: VecDeque::new(),
                next: 1,
            })),
            head: watch::channel(0).0,
            horizon: horizon.max(1),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Log> {
        self.log.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn publish(&self, payload: EventPayload) -> u64 {
        let mut log = self.lock();
        let seq = log.next;
        log.next += 1;
        log.events.push_back(ApiEvent { seq, payload });
        while log.events.len() > self.horizon {
            log.events.pop_front();
        }
        self.head.send_replace(seq);
        seq
    }

    /// Sequence number of the newest event, 0 before the first.
    pub fn head(&self) -> u64 {
        self.lock().next - 1
    }

    /// Retained events with `seq > from`, or the gap if some of them were
    /// already dropped.
    pub fn since(&self, from: u64) -> Result<Vec<ApiEvent>, Truncated> {
        let log = self.lock();
        let oldest = log.events.front().map_or(log.next, |e| e.seq);
        if from + 1 < oldest {
            return Err(Truncated { requested: from, oldest });
        }
        Ok(log.events.iter().filter(|e| e.seq > from).cloned().collect())
    }

    /// Watch channel carrying the head sequence number.
    pub fn watch(&self) -> watch::Receiver<u64> {
        self.head.subscribe()
    }

    /// Forwards a blocking receiver into the hub on its own thread until
    /// the sender side goes away.
    pub fn pump<T: Send + 'static>(
        &self,
        name: &str,
        mut recv: impl FnMut() -> Option<T> + Send + 'static,
        wrap: fn(T) -> EventPayload,
    ) -> std::thread::JoinHandle<()> {
        let hub = self.clone();
        std::thread::Builder::new()
            .name(format!("pump-{name}"))
            .spawn(move || {
                while let Some(e) = recv() {
                    hub.publish(wrap(e));
                }
                log::debug!("event source closed");
            })
            .expect("spawn pump thread")
    }
}
