//! The single-writer command queue.
//!
//! Commands are sent to one writer thread, which validates and applies them
//! in arrival order, appends the resulting events to the log in groups and
//! fsyncs once per group. Replies are released only after the fsync, so an
//! acknowledged command survives a crash. After each group the new state is
//! published through an `ArcSwap` so readers never wait for the writer.

use std::path::Path;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use arc_swap::ArcSwap;
use tokio::sync::oneshot;

use crate::error::ServiceError;
use crate::settings::Settings;
use crate::state::{Command, Reply, ServiceState};
use crate::store::{Recovery, Store};

const MAX_GROUP: usize = 1024;

type Responder = oneshot::Sender<Result<Reply, ServiceError>>;

enum Message {
    Run(Command, Responder),
    Snapshot(oneshot::Sender<Result<(), ServiceError>>),
}

struct Inner {
    settings: Settings,
    state: ArcSwap<ServiceState>,
    tx: Mutex<Option<mpsc::Sender<Message>>>,
    writer: Mutex<Option<JoinHandle<()>>>,
    recovery: Recovery,
}

/// Cheap to clone; all clones share one writer.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl Service {
    /// Recovers state from `dir` and starts the writer thread.
    pub fn open(dir: &Path, settings: Settings) -> Result<Service, ServiceError> {
        let (store, state, recovery) = Store::open(dir, &settings)?;
        let (tx, rx) = mpsc::channel();
        let inner = Arc::new(Inner {
            state: ArcSwap::from_pointee(state.clone()),
            settings,
            tx: Mutex::new(Some(tx)),
            writer: Mutex::new(None),
            recovery,
        });
        let weak = Arc::downgrade(&inner);
        let settings = inner.settings.clone();
        let handle = std::thread::Builder::new()
            .name("dialclean-writer".into())
            .spawn(move || {
                writer_loop(rx, store, state, &settings, |s| {
                    if let Some(inner) = weak.upgrade() {
                        inner.state.store(s);
                    }
                })
            })
            .map_err(|e| ServiceError::Storage(format!("spawning writer: {e}")))?;
        *inner.writer.lock().expect("writer lock") = Some(handle);
        Ok(Service { inner })
    }

    pub fn settings(&self) -> &Settings {
        &self.inner.settings
    }

    pub fn recovery(&self) -> &Recovery {
        &self.inner.recovery
    }

    /// The latest committed state.
    pub fn state(&self) -> Arc<ServiceState> {
        self.inner.state.load_full()
    }

    fn send(&self, msg: Message) -> Result<(), ServiceError> {
        let tx = self.inner.tx.lock().expect("sender lock");
        tx.as_ref()
            .ok_or(ServiceError::Unavailable)?
            .send(msg)
            .map_err(|_| ServiceError::Unavailable)
    }

    /// Runs a command through the writer and waits for its durable reply.
    pub async fn execute(&self, cmd: Command) -> Result<Reply, ServiceError> {
        let (tx, rx) = oneshot::channel();
        self.send(Message::Run(cmd, tx))?;
        rx.await.map_err(|_| ServiceError::Unavailable)?
    }

    /// Blocking form of [`Service::execute`] for non-async callers.
    pub fn execute_blocking(&self, cmd: Command) -> Result<Reply, ServiceError> {
        let (tx, rx) = oneshot::channel();
        self.send(Message::Run(cmd, tx))?;
        rx.blocking_recv().map_err(|_| ServiceError::Unavailable)?
    }

    /// Forces a snapshot and log truncation.
    pub async fn snapshot(&self) -> Result<(), ServiceError> {
        let (tx, rx) = oneshot::channel();
        self.send(Message::Snapshot(tx))?;
        rx.await.map_err(|_| ServiceError::Unavailable)?
    }

    /// Stops accepting commands, drains the queue and joins the writer.
    /// Later calls on any clone fail with `Unavailable`.
    pub fn shutdown(&self) {
        self.inner.tx.lock().expect("sender lock").take();
        let handle = self.inner.writer.lock().expect("writer lock").take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }
}

fn writer_loop(
    rx: mpsc::Receiver<Message>,
    mut store: Store,
    mut state: ServiceState,
    settings: &Settings,
    publish: impl Fn(Arc<ServiceState>),
) {
    let mut poisoned: Option<ServiceError> = None;
    while let Ok(first) = rx.recv() {
        let mut group = vec![first];
        while group.len() < MAX_GROUP {
            match rx.try_recv() {
                Ok(m) => group.push(m),
                Err(_) => break,
            }
        }

        let first_seq = state.seq + 1;
        let mut events = Vec::new();
        let mut replies: Vec<(Responder, Result<Reply, ServiceError>)> = Vec::new();
        let mut snapshots = Vec::new();
        for msg in group {
            match msg {
                Message::Run(cmd, tx) => {
                    if let Some(e) = &poisoned {
                        let _ = tx.send(Err(e.clone()));
                        continue;
                    }
                    let now = (settings.clock)();
                    let result = state.handle(settings, cmd, now).map(|(event, reply)| {
                        events.extend(event);
                        reply
                    });
                    replies.push((tx, result));
                }
                Message::Snapshot(tx) => snapshots.push(tx),
            }
        }

        if let Err(e) = store.append(first_seq, &events) {
            // Memory is ahead of disk now; refuse everything from here on.
            poisoned = Some(e.clone());
            for (tx, _) in replies {
                let _ = tx.send(Err(e.clone()));
            }
            for tx in snapshots {
                let _ = tx.send(Err(e.clone()));
            }
            continue;
        }
        if !events.is_empty() {
            publish(Arc::new(state.clone()));
        }
        for (tx, result) in replies {
            let _ = tx.send(result);
        }

        let due =
            settings.snapshot_every > 0 && store.events_since_snapshot() >= settings.snapshot_every;
        if poisoned.is_none() && (due || !snapshots.is_empty()) {
            let result = store.snapshot(&state);
            if let Err(e) = &result {
                poisoned = Some(e.clone());
            }
            for tx in snapshots {
                let _ = tx.send(result.clone());
            }
        }
    }
}
