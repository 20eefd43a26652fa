//! Durable crowd annotation service: batches of HITs with hidden gold
//! checkpoints, worker qualification and exclusion, and best-worker export.
//!
//! Every state change goes through a single writer thread that appends the
//! event to a write-ahead log and fsyncs it before replying. Readers see an
//! immutable snapshot of the state that is swapped after each commit.

pub mod error;
pub mod http;
pub mod payload;
pub mod service;
pub mod settings;
pub mod state;
pub mod store;

pub use error::{ServiceError, SpanDiff};
pub use service::Service;
pub use settings::{QualificationHit, QualificationSpec, Settings};
pub use state::{Command, Event, Reply, ServiceState};
