//! Labeling-schema mathematics: token-level scoring, worker qualification and
//! checkpoint gating, best-worker aggregation, Fleiss' kappa and worker
//! analytics.

mod aggregate;
mod analytics;
mod kappa;
mod metrics;
mod workers;

use thiserror::Error;

pub use aggregate::{
    aggregate_best_worker, aggregate_conversation, BestWorker, ConversationAggregate, TurnLabels,
};
pub use analytics::{worker_analytics, AnalyticsReport, HistogramBin, WorkerRow};
pub use kappa::{
    corpus_kappa, fleiss_kappa, turn_ratings, KappaError, KappaReport, TurnKappa, TurnRatings,
    KAPPA_CATEGORIES,
};
pub use metrics::{token_prf, Confusion, MetricsReport};
pub use workers::{
    checkpoint_filter, meets_threshold, purge_and_repost, qualify_worker, Annotation,
    CheckpointResult, CheckpointScore, PurgeOutcome, Qualification, RepostEntry, WorkerRecord,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("no gold labels for qualification HIT {0}")]
    MissingGold(String),
    #[error("turn {0} has no qualified annotation")]
    UnlabeledTurn(usize),
    #[error("annotation by {worker_id} on {hit_id} has {got} labels, HIT has {expected} tokens")]
    AnnotationLength {
        worker_id: String,
        hit_id: String,
        expected: usize,
        got: usize,
    },
}
