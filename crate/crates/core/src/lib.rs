//! Cleanup toolkit for multi-party spoken-conversation transcripts.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: tokens, turns, conversations, categories, label sets, config
//! - [`markup`]: Treebank-style disfluency markup parsing and removal
//! - [`chunker`]: overlapping, turn-aligned chunking and OR-merge reassembly
//! - [`quality`]: token P/R/F1, worker gating, aggregation, Fleiss' kappa
//! - [`detectors`]: oracle, heuristic and external-process detectors
//! - [`pipeline`]: two-stage and combined cleanup flows plus evaluation
//! - [`par`]: the data-parallel executor (rayon, or sequential without the
//!   `parallel` feature)

pub mod chunker;
pub mod detectors;
pub mod io;
pub mod markup;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod quality;

pub use model::{
    Category, Conversation, LabelSet, LabelSource, PipelineConfig, Split, Token, TokenId, Turn,
};
