//! Request and response bodies of the `/v1` API.

use dialclean_core::chunker::Hit;
use dialclean_core::model::{Category, Conversation, LabelSet, StatsReport};
use dialclean_core::quality::{CheckpointScore, TurnLabels};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenRef {
    pub turn: usize,
    pub position: usize,
}

/// A gold-backed HIT mixed into a batch. `gold` labels the checkpoint's
/// conversation; only tokens inside the hit are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSpec {
    pub hit: Hit,
    pub gold: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateBatch {
    pub batch_id: String,
    /// Every conversation the hits and checkpoints refer to, unless already
    /// sent with an earlier batch.
    #[serde(default)]
    pub conversations: Vec<Conversation>,
    pub hits: Vec<Hit>,
    #[serde(default)]
    pub checkpoints: Vec<CheckpointSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchState {
    /// Some hit still has fewer than the minimum number of annotations.
    Open,
    /// Every hit is fully annotated.
    Closed,
    /// Fully annotated, and every contributing worker has passed at least
    /// one checkpoint.
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchView {
    pub batch_id: String,
    pub state: BatchState,
    /// All hit ids in posting order, checkpoints included.
    pub hit_ids: Vec<String>,
    pub checkpoint_ids: Vec<String>,
    pub hits_complete: usize,
    pub hits_total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadToken {
    pub position: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadTurn {
    pub turn: usize,
    pub speaker: String,
    /// The hit shows only part of this turn.
    pub partial: bool,
    pub tokens: Vec<PayloadToken>,
}

/// What a worker is shown. Identical in shape for regular, checkpoint and
/// qualification hits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitPayload {
    pub hit_id: String,
    /// Milliseconds since the Unix epoch.
    pub lease_expires_at: u64,
    pub turns: Vec<PayloadTurn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLabel {
    pub turn: usize,
    pub position: usize,
    /// `None` keeps the token.
    pub category: Option<Category>,
}

/// Either one label per token in hit order, or an explicit span-complete
/// list of token labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubmittedLabels {
    Dense(Vec<Option<Category>>),
    Tokens(Vec<TokenLabel>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submit {
    #[serde(default)]
    pub worker_id: Option<String>,
    pub labels: SubmittedLabels,
    /// Client-measured seconds; the server's lease clock is authoritative.
    #[serde(default)]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SubmitOutcome {
    Accepted,
    Qualified {
        f1: f64,
    },
    NotQualified {
        f1: f64,
    },
    /// The submission was a checkpoint scored under threshold.
    Excluded {
        purged: usize,
        reposted: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerView {
    pub worker_id: String,
    pub qualified: bool,
    pub excluded: bool,
    pub hit_count: usize,
    pub mean_f1: Option<f64>,
    pub f1_history: Vec<CheckpointScore>,
    pub mean_elapsed_seconds: Option<f64>,
    pub active_lease: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledTurns {
    pub conv_id: String,
    pub turns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationExport {
    pub conv_id: String,
    pub turns: Vec<TurnLabels>,
}

/// Aggregated gold label sets with the per-turn provenance and corpus stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsExport {
    pub labels: Vec<LabelSet>,
    pub provenance: Vec<ConversationExport>,
    pub unlabeled: Vec<UnlabeledTurns>,
    pub stats: StatsReport,
}
