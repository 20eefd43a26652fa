use std::fmt;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use dialclean_core::chunker::Hit;
use dialclean_core::model::{Category, Conversation, LabelSet, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::state::validate_hit;

pub const DEFAULT_LEASE_SECONDS: u64 = 30 * 60;
pub const DEFAULT_SNAPSHOT_EVERY: usize = 5_000;

/// Milliseconds since the Unix epoch.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    })
}

/// Wire form of the qualification HIT: a gold-labeled conversation and
/// optionally the chunk of it to show (the whole conversation by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationSpec {
    pub conversation: Conversation,
    #[serde(default)]
    pub hit: Option<Hit>,
    pub gold: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationHit {
    pub conversation: Conversation,
    pub hit: Hit,
    pub gold: Vec<Option<Category>>,
}

impl QualificationSpec {
    pub fn resolve(self) -> Result<QualificationHit, ServiceError> {
        let conv = self.conversation;
        let hit = self.hit.unwrap_or_else(|| Hit {
            hit_id: "qualification".into(),
            conv_id: conv.conv_id().to_string(),
            chunk_index: 0,
            token_start: 0,
            token_end: conv.token_count(),
            turn_start: 0,
            turn_end: conv.turns().len(),
            overlap_left: [0, 0],
            overlap_right: [conv.token_count(); 2],
        });
        validate_hit(&hit, &conv)?;
        self.gold
            .validate_against(&conv)
            .map_err(|e| ServiceError::InvalidGold {
                hit_id: hit.hit_id.clone(),
                reason: e.to_string(),
            })?;
        let gold = hit.labels_from(&conv, &self.gold);
        Ok(QualificationHit {
            conversation: conv,
            hit,
            gold,
        })
    }
}

#[derive(Clone)]
pub struct Settings {
    /// Threshold and minimum annotations per hit come from here.
    pub pipeline: PipelineConfig,
    pub lease_ms: u64,
    /// Without a qualification HIT every new worker starts qualified.
    pub qualification: Option<Arc<QualificationHit>>,
    /// Seeds checkpoint placement.
    pub seed: u64,
    pub snapshot_every: usize,
    pub clock: Clock,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            lease_ms: DEFAULT_LEASE_SECONDS * 1000,
            qualification: None,
            seed: 0,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            clock: system_clock(),
        }
    }
}

impl fmt::Debug for Settings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Settings")
            .field("pipeline", &self.pipeline)
            .field("lease_ms", &self.lease_ms)
            .field(
                "qualification",
                &self.qualification.as_ref().map(|q| &q.hit.hit_id),
            )
            .field("seed", &self.seed)
            .field("snapshot_every", &self.snapshot_every)
            .finish()
    }
}

impl Settings {
    pub fn threshold(&self) -> f64 {
        self.pipeline.qualification_threshold
    }

    pub fn min_annotations(&self) -> usize {
        self.pipeline.min_annotations_per_hit
    }
}

/// The settings that replaying the log depends on. Stored next to the log
/// and checked on every open, so a restart cannot reinterpret old events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedSettings {
    pub qualification_threshold: f64,
    pub min_annotations_per_hit: usize,
    pub seed: u64,
    pub qualification: Option<QualificationHit>,
}

impl Settings {
    pub fn persisted(&self) -> PersistedSettings {
        PersistedSettings {
            qualification_threshold: self.threshold(),
            min_annotations_per_hit: self.min_annotations(),
            seed: self.seed,
            qualification: self.qualification.as_deref().cloned(),
        }
    }

    /// `self` with the replay-relevant fields taken from `p`.
    pub fn with_persisted(mut self, p: PersistedSettings) -> Settings {
        self.pipeline.qualification_threshold = p.qualification_threshold;
        self.pipeline.min_annotations_per_hit = p.min_annotations_per_hit;
        self.seed = p.seed;
        self.qualification = p.qualification.map(Arc::new);
        self
    }
}
