//! Detectors label tokens for removal. A single-turn detector sees one slash
//! unit per call; a multi-turn detector sees a chunk of consecutive turns.
//!
//! Three kinds exist: an oracle replaying gold labels, rule-based heuristics,
//! and an adapter that pipes chunks through an external process.

mod external;
mod heuristics;
mod oracle;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Category, Conversation, LabelSet, TokenId};
use crate::par::Executor;

pub use external::{parse_reply, ExternalDetector, PROTOCOL_VERSION};
pub use heuristics::{normalize, Heuristic, HeuristicDetector, Lexicon, DEFAULT_LEXICON};
pub use oracle::OracleDetector;

/// Boundary token between turns in multi-turn requests.
pub const SEP: &str = "[SEP]";

/// Per-token output of a detector: `Some(category)` marks a removal.
pub type Labels = Vec<Option<Category>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("chunk {chunk_id}: input costs {len} positions, limit is {max_seq}")]
    OverlongInput {
        chunk_id: String,
        len: usize,
        max_seq: usize,
    },
    #[error("chunk {chunk_id}: no gold labels for conversation {conv_id}")]
    MissingGold { chunk_id: String, conv_id: String },
    #[error("chunk {chunk_id}: detector did not reply within {seconds} s")]
    Timeout { chunk_id: String, seconds: f64 },
    #[error("chunk {chunk_id}: detector process failed ({status}){}", stderr_suffix(.stderr))]
    Crash {
        chunk_id: String,
        status: String,
        stderr: String,
    },
    #[error("chunk {chunk_id}: expected {expected} labels, got {got}")]
    LengthMismatch {
        chunk_id: String,
        expected: usize,
        got: usize,
    },
    #[error("chunk {chunk_id}: invalid label {label:?}")]
    MalformedLabel { chunk_id: String, label: String },
    #[error("cannot start detector {command:?}: {message}")]
    Spawn { command: String, message: String },
    #[error("invalid detector spec {0:?}; expected oracle, heuristic:NAME or external:COMMAND")]
    InvalidSpec(String),
    #[error("unknown heuristic {0:?}")]
    UnknownHeuristic(String),
    #[error("{0} detector needs gold labels")]
    GoldRequired(String),
    #[error("cannot read lexicon {path}: {message}")]
    Lexicon { path: String, message: String },
}

fn stderr_suffix(stderr: &str) -> String {
    let s = stderr.trim();
    if s.is_empty() {
        String::new()
    } else {
        format!(": {s}")
    }
}

impl DetectorError {
    /// The chunk the error is about, when there is one.
    pub fn chunk_id(&self) -> Option<&str> {
        match self {
            DetectorError::OverlongInput { chunk_id, .. }
            | DetectorError::MissingGold { chunk_id, .. }
            | DetectorError::Timeout { chunk_id, .. }
            | DetectorError::Crash { chunk_id, .. }
            | DetectorError::LengthMismatch { chunk_id, .. }
            | DetectorError::MalformedLabel { chunk_id, .. } => Some(chunk_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    SingleTurn,
    MultiTurn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorKind {
    Oracle,
    Heuristic { name: Heuristic },
    External { command: String, protocol: u32 },
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorKind::Oracle => f.write_str("oracle"),
            DetectorKind::Heuristic { name } => write!(f, "heuristic:{name}"),
            DetectorKind::External { command, .. } => write!(f, "external:{command}"),
        }
    }
}

impl FromStr for DetectorKind {
    type Err = DetectorError;

    /// Parses `oracle`, `heuristic:NAME` or `external:COMMAND`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "oracle" {
            return Ok(DetectorKind::Oracle);
        }
        match s.split_once(':') {
            Some(("heuristic", name)) => Ok(DetectorKind::Heuristic {
                name: name.parse()?,
            }),
            Some(("external", command)) if !command.trim().is_empty() => {
                Ok(DetectorKind::External {
                    command: command.to_string(),
                    protocol: PROTOCOL_VERSION,
                })
            }
            _ => Err(DetectorError::InvalidSpec(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorSpec {
    #[serde(flatten)]
    pub kind: DetectorKind,
    pub scope: Scope,
    pub max_seq: usize,
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind, scope: Scope, max_seq: usize) -> Self {
        Self {
            kind,
            scope,
            max_seq,
        }
    }

    pub fn parse(s: &str, scope: Scope, max_seq: usize) -> Result<Self, DetectorError> {
        Ok(Self::new(s.parse()?, scope, max_seq))
    }
}

/// A run of input tokens belonging to one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub speaker: String,
    /// The turn in the conversation the tokens came from.
    pub turn: usize,
    /// Half-open range into [`DetectorInput::tokens`].
    pub start: usize,
    pub end: usize,
    /// True when the chunk holds only part of the turn.
    pub partial: bool,
}

/// What a detector sees for one call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorInput {
    pub chunk_id: String,
    pub conv_id: String,
    /// Identity of each token in the original conversation.
    pub ids: Vec<TokenId>,
    pub tokens: Vec<String>,
    pub segments: Vec<Segment>,
}

impl DetectorInput {
    /// Tokens `flat` of `conv` in reading order, split into per-turn
    /// segments. `original` maps flat indices of `conv` to the ids reported
    /// to the detector; `None` keeps `conv`'s own ids.
    pub fn from_span(
        chunk_id: impl Into<String>,
        conv: &Conversation,
        flat: std::ops::Range<usize>,
        original: Option<&[TokenId]>,
    ) -> Self {
        let mut input = DetectorInput {
            chunk_id: chunk_id.into(),
            conv_id: conv.conv_id().to_string(),
            ids: Vec::with_capacity(flat.len()),
            tokens: Vec::with_capacity(flat.len()),
            segments: Vec::new(),
        };
        let mut current: Option<usize> = None;
        for i in flat.clone() {
            let id = conv.id_at(i).expect("span inside conversation");
            let token = conv.token(id).expect("id from conversation");
            if current != Some(id.turn) {
                let turn = &conv.turns()[id.turn];
                let turn_start = conv.turn_offset(id.turn);
                let turn_end = conv.turn_offset(id.turn + 1);
                input.segments.push(Segment {
                    speaker: turn.speaker.clone(),
                    turn: original.map_or(id.turn, |o| o[i].turn),
                    start: input.tokens.len(),
                    end: input.tokens.len(),
                    partial: turn_start < flat.start || turn_end > flat.end,
                });
                current = Some(id.turn);
            }
            input.ids.push(original.map_or(id, |o| o[i]));
            input.tokens.push(token.text.clone());
            input.segments.last_mut().expect("pushed above").end += 1;
        }
        input
    }

    /// One slash unit (or a piece of one) as a single-turn input.
    pub fn unit(
        chunk_id: impl Into<String>,
        conv_id: &str,
        speaker: &str,
        tokens: &[crate::model::Token],
    ) -> Self {
        let turn = tokens.first().map_or(0, |t| t.id.turn);
        DetectorInput {
            chunk_id: chunk_id.into(),
            conv_id: conv_id.to_string(),
            ids: tokens.iter().map(|t| t.id).collect(),
            tokens: tokens.iter().map(|t| t.text.clone()).collect(),
            segments: vec![Segment {
                speaker: speaker.to_string(),
                turn,
                start: 0,
                end: tokens.len(),
                partial: false,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Sequence positions used: tokens plus one separator per interior
    /// boundary.
    pub fn cost(&self) -> usize {
        self.tokens.len() + self.segments.len().saturating_sub(1)
    }

    /// The tab-separated request line, without the trailing newline.
    pub fn request_line(&self) -> String {
        let mut parts: Vec<&str> = Vec::with_capacity(self.cost());
        for (k, seg) in self.segments.iter().enumerate() {
            if k > 0 {
                parts.push(SEP);
            }
            parts.extend(self.tokens[seg.start..seg.end].iter().map(String::as_str));
        }
        parts.join("\t")
    }

    pub fn check_cost(&self, max_seq: usize) -> Result<(), DetectorError> {
        let len = self.cost();
        if len > max_seq {
            return Err(DetectorError::OverlongInput {
                chunk_id: self.chunk_id.clone(),
                len,
                max_seq,
            });
        }
        Ok(())
    }
}

pub trait Detector: Send + Sync {
    fn spec(&self) -> &DetectorSpec;

    /// Labels one input, exactly one label per token.
    fn detect(&self, input: &DetectorInput) -> Result<Labels, DetectorError>;

    /// Labels many inputs; results follow input order.
    fn detect_batch(
        &self,
        inputs: &[DetectorInput],
        exec: &Executor,
    ) -> Result<Vec<Labels>, DetectorError> {
        exec.try_map(inputs, |i| self.detect(i))
    }
}

/// Shared resources detectors may need.
#[derive(Debug, Clone, Default)]
pub struct DetectorContext {
    /// Gold label sets keyed by conversation id, for the oracle.
    pub gold: Option<Arc<BTreeMap<String, LabelSet>>>,
    pub lexicon: Option<Arc<Lexicon>>,
    /// Reply timeout for external detectors; a default applies when `None`.
    pub timeout: Option<Duration>,
}

pub fn build_detector(
    spec: &DetectorSpec,
    ctx: &DetectorContext,
) -> Result<Box<dyn Detector>, DetectorError> {
    Ok(match &spec.kind {
        DetectorKind::Oracle => {
            let gold = ctx
                .gold
                .clone()
                .ok_or_else(|| DetectorError::GoldRequired("oracle".into()))?;
            Box::new(OracleDetector::new(spec.clone(), gold))
        }
        DetectorKind::Heuristic { name } => {
            let lexicon = ctx
                .lexicon
                .clone()
                .unwrap_or_else(|| Arc::new(Lexicon::default()));
            Box::new(HeuristicDetector::new(spec.clone(), *name, lexicon))
        }
        DetectorKind::External { command, .. } => {
            let mut d = ExternalDetector::new(spec.clone(), command.clone());
            if let Some(t) = ctx.timeout {
                d = d.with_timeout(t);
            }
            Box::new(d)
        }
    })
}
