use serde::Serialize;
use thiserror::Error;

use crate::payload::TokenRef;

/// Everything a service call can refuse with. `code()` is the stable
/// machine-readable name sent to clients.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("batch {0} already exists")]
    DuplicateBatch(String),
    #[error("hit {0} already exists")]
    DuplicateHit(String),
    #[error("batch manifest has no hits")]
    EmptyManifest,
    #[error("conversation {0} is not known to the service")]
    UnknownConversation(String),
    #[error("conversation {0} differs from the stored copy")]
    ConversationConflict(String),
    #[error("hit {hit_id}: {reason}")]
    InvalidHit { hit_id: String, reason: String },
    #[error("checkpoint {hit_id}: {reason}")]
    InvalidGold { hit_id: String, reason: String },
    #[error("unknown batch {0}")]
    UnknownBatch(String),
    #[error("unknown hit {0}")]
    UnknownHit(String),
    #[error("unknown worker {0}")]
    UnknownWorker(String),
    #[error("worker {0} has not passed qualification")]
    UnqualifiedWorker(String),
    #[error("worker {0} is excluded")]
    ExcludedWorker(String),
    #[error("no work available for worker {0}")]
    NoWorkAvailable(String),
    #[error("worker {worker_id} holds no active lease on hit {hit_id}")]
    LeaseExpired { worker_id: String, hit_id: String },
    #[error("labels do not match the span of hit {}: {} expected, {} sent", .0.hit_id, .0.expected, .0.got)]
    LabelSpanMismatch(Box<SpanDiff>),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("service is shutting down")]
    Unavailable,
}

/// How a submitted label list differs from the HIT's token span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanDiff {
    pub hit_id: String,
    pub expected: usize,
    pub got: usize,
    pub missing: Vec<TokenRef>,
    pub unexpected: Vec<TokenRef>,
    pub duplicated: Vec<TokenRef>,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::DuplicateBatch(_) => "duplicate_batch",
            ServiceError::DuplicateHit(_) => "duplicate_hit",
            ServiceError::EmptyManifest => "empty_manifest",
            ServiceError::UnknownConversation(_) => "unknown_conversation",
            ServiceError::ConversationConflict(_) => "conversation_conflict",
            ServiceError::InvalidHit { .. } => "invalid_hit",
            ServiceError::InvalidGold { .. } => "invalid_gold",
            ServiceError::UnknownBatch(_) => "unknown_batch",
            ServiceError::UnknownHit(_) => "unknown_hit",
            ServiceError::UnknownWorker(_) => "unknown_worker",
            ServiceError::UnqualifiedWorker(_) => "unqualified_worker",
            ServiceError::ExcludedWorker(_) => "excluded_worker",
            ServiceError::NoWorkAvailable(_) => "no_work_available",
            ServiceError::LeaseExpired { .. } => "lease_expired",
            ServiceError::LabelSpanMismatch(_) => "label_span_mismatch",
            ServiceError::Storage(_) => "storage",
            ServiceError::Unavailable => "unavailable",
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Storage(e.to_string())
    }
}
