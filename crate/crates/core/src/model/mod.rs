//! Shared data model: transcripts, cleanup labels, categories and configuration.
//!
//! Every value here is immutable after construction and `Send + Sync`.

mod config;
mod conversation;
mod labels;
mod stats;

pub use config::{ChunkAlignment, ConfigError, PipelineConfig};
pub use conversation::{Conversation, ConversationRecord, Split, Token, TokenId, Turn, TurnRecord};
pub use labels::{Category, LabelSet, LabelSetRecord, LabelSource, RemovalRecord};
pub use stats::{dataset_stats, Counts, StatsReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("conversation id must not be empty")]
    EmptyConversationId,
    #[error("conversation {conv_id}: turn {turn} has no slash units")]
    EmptyTurn { conv_id: String, turn: usize },
    #[error("conversation {conv_id}: turn {turn} slash unit {unit} has no tokens")]
    EmptySlashUnit {
        conv_id: String,
        turn: usize,
        unit: usize,
    },
    #[error("conversation {conv_id}: invalid token {text:?} at turn {turn} position {position}")]
    InvalidToken {
        conv_id: String,
        turn: usize,
        position: usize,
        text: String,
    },
    #[error(
        "label set for {conv_id}: token (turn {turn}, position {position}) labeled more than once"
    )]
    DuplicateRemoval {
        conv_id: String,
        turn: usize,
        position: usize,
    },
    #[error("label set for {conv_id}: token (turn {turn}, position {position}) does not exist")]
    DanglingToken {
        conv_id: String,
        turn: usize,
        position: usize,
    },
    #[error("label set references unknown conversation {0}")]
    MissingConversation(String),
    #[error("label set for {conv_id} applied to conversation {other}")]
    ConversationMismatch { conv_id: String, other: String },
    #[error("more than one label set for conversation {0}")]
    DuplicateLabelSet(String),
    #[error("duplicate conversation id {0}")]
    DuplicateConversation(String),
    #[error("invalid label source {0:?}")]
    InvalidSource(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
}
