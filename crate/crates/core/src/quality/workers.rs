use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::Confusion;
use super::QualityError;
use crate::model::Category;

/// Slack for comparing an F1 against the threshold, so that a score which is
/// exactly the threshold in decimal but not in binary still passes.
const THRESHOLD_EPSILON: f64 = 1e-9;

/// True when `f1` passes `threshold` (boundary inclusive).
pub fn meets_threshold(f1: f64, threshold: f64) -> bool {
    f1 + THRESHOLD_EPSILON >= threshold
}

/// One worker's submission for one HIT: a label per token of the HIT span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub worker_id: String,
    pub hit_id: String,
    pub labels: Vec<Option<Category>>,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub submitted_at: u64,
    #[serde(default)]
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointScore {
    pub checkpoint_id: String,
    pub f1: f64,
}

/// Running quality state of one worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub worker_id: String,
    pub qualified: bool,
    /// Set once a checkpoint fails; an excluded worker never requalifies.
    #[serde(default)]
    pub excluded: bool,
    /// Qualification score first, then checkpoint scores in submission order.
    pub f1_history: Vec<CheckpointScore>,
    pub hit_count: usize,
    pub elapsed_times: Vec<f64>,
}

impl WorkerRecord {
    pub fn new(worker_id: impl Into<String>) -> Self {
        Self {
            worker_id: worker_id.into(),
            qualified: false,
            excluded: false,
            f1_history: Vec::new(),
            hit_count: 0,
            elapsed_times: Vec::new(),
        }
    }

    /// Running mean over the F1 history; `None` before any scored HIT.
    pub fn mean_f1(&self) -> Option<f64> {
        if self.f1_history.is_empty() {
            None
        } else {
            Some(self.f1_history.iter().map(|s| s.f1).sum::<f64>() / self.f1_history.len() as f64)
        }
    }

    pub fn mean_elapsed(&self) -> Option<f64> {
        if self.elapsed_times.is_empty() {
            None
        } else {
            Some(self.elapsed_times.iter().sum::<f64>() / self.elapsed_times.len() as f64)
        }
    }

    /// Records one stored submission.
    pub fn record_submission(&mut self, elapsed_seconds: f64) {
        self.hit_count += 1;
        self.elapsed_times.push(elapsed_seconds);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qualification {
    pub f1: f64,
    pub passed: bool,
}

fn score(annotation: &Annotation, gold: &[Option<Category>]) -> Result<f64, QualityError> {
    if annotation.labels.len() != gold.len() {
        return Err(QualityError::AnnotationLength {
            worker_id: annotation.worker_id.clone(),
            hit_id: annotation.hit_id.clone(),
            expected: gold.len(),
            got: annotation.labels.len(),
        });
    }
    Ok(Confusion::from_labels(&annotation.labels, gold).report().f1)
}

/// Scores a qualification HIT submission against its gold.
pub fn qualify_worker(
    annotation: &Annotation,
    gold: Option<&[Option<Category>]>,
    threshold: f64,
) -> Result<Qualification, QualityError> {
    let gold = gold.ok_or_else(|| QualityError::MissingGold(annotation.hit_id.clone()))?;
    let f1 = score(annotation, gold)?;
    Ok(Qualification {
        f1,
        passed: meets_threshold(f1, threshold),
    })
}

/// A scored checkpoint submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointResult {
    pub worker_id: String,
    pub checkpoint_id: String,
    pub f1: f64,
}

impl CheckpointResult {
    pub fn score(
        annotation: &Annotation,
        gold: Option<&[Option<Category>]>,
    ) -> Result<Self, QualityError> {
        let gold = gold.ok_or_else(|| QualityError::MissingGold(annotation.hit_id.clone()))?;
        Ok(Self {
            worker_id: annotation.worker_id.clone(),
            checkpoint_id: annotation.hit_id.clone(),
            f1: score(annotation, gold)?,
        })
    }
}

/// Appends each checkpoint result to its worker's history and marks workers
/// scoring below `threshold` as excluded. Returns the ids excluded by this
/// call. Results for unknown workers are ignored.
pub fn checkpoint_filter(
    workers: &mut [WorkerRecord],
    results: &[CheckpointResult],
    threshold: f64,
) -> BTreeSet<String> {
    let index: BTreeMap<String, usize> = workers
        .iter()
        .enumerate()
        .map(|(i, w)| (w.worker_id.clone(), i))
        .collect();
    let mut excluded = BTreeSet::new();
    for r in results {
        let Some(&i) = index.get(&r.worker_id) else {
            continue;
        };
        let w = &mut workers[i];
        w.f1_history.push(CheckpointScore {
            checkpoint_id: r.checkpoint_id.clone(),
            f1: r.f1,
        });
        if !meets_threshold(r.f1, threshold) && !w.excluded {
            w.qualified = false;
            w.excluded = true;
            excluded.insert(w.worker_id.clone());
        }
    }
    excluded
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepostEntry {
    pub hit_id: String,
    pub have: usize,
    pub need: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurgeOutcome {
    pub kept: Vec<Annotation>,
    pub purged: Vec<Annotation>,
    /// HITs below the annotation minimum, in the order of `hit_ids`.
    pub repost: Vec<RepostEntry>,
}

/// Drops every annotation by an excluded worker and queues each HIT of
/// `hit_ids` left with fewer than `min_annotations` annotations.
pub fn purge_and_repost<'a>(
    annotations: Vec<Annotation>,
    excluded: &BTreeSet<String>,
    hit_ids: impl IntoIterator<Item = &'a str>,
    min_annotations: usize,
) -> PurgeOutcome {
    let (purged, kept): (Vec<_>, Vec<_>) = annotations
        .into_iter()
        .partition(|a| excluded.contains(&a.worker_id));
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &kept {
        *counts.entry(a.hit_id.as_str()).or_default() += 1;
    }
    let mut seen = BTreeSet::new();
    let repost = hit_ids
        .into_iter()
        .filter(|h| seen.insert(*h))
        .filter_map(|h| {
            let have = counts.get(h).copied().unwrap_or(0);
            (have < min_annotations).then(|| RepostEntry {
                hit_id: h.to_string(),
                have,
                need: min_annotations - have,
            })
        })
        .collect();
    PurgeOutcome {
        kept,
        purged,
        repost,
    }
}
