use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::workers::{Annotation, WorkerRecord};
use super::QualityError;
use crate::chunker::Hit;
use crate::model::{Category, Conversation, LabelSet, LabelSource};

/// The worker whose labels were copied for a turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestWorker {
    pub worker_id: String,
    pub mean_f1: f64,
    pub hit_count: usize,
    pub hit_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnLabels {
    pub turn: usize,
    pub best: BestWorker,
    /// One label per token of the turn, copied from the best worker.
    pub labels: Vec<Option<Category>>,
}

/// Ranks candidates: higher mean F1, then more HITs, then smaller id.
fn rank(a: &BestWorker, b: &BestWorker) -> Ordering {
    b.mean_f1
        .total_cmp(&a.mean_f1)
        .then(b.hit_count.cmp(&a.hit_count))
        .then(a.worker_id.cmp(&b.worker_id))
}

/// Picks the best qualified worker among annotations whose HIT fully covers
/// `turn` and copies that worker's labels for the turn.
///
/// A worker with several covering HITs contributes the one with the lowest
/// chunk index. Annotations on unknown HITs or by workers who are not
/// currently qualified are ignored.
pub fn aggregate_best_worker(
    conv: &Conversation,
    turn: usize,
    hits: &BTreeMap<String, Hit>,
    annotations: &[Annotation],
    workers: &BTreeMap<String, WorkerRecord>,
) -> Result<TurnLabels, QualityError> {
    let mut per_worker: BTreeMap<&str, (&Hit, &Annotation)> = BTreeMap::new();
    for a in annotations {
        let Some(hit) = hits.get(&a.hit_id) else {
            continue;
        };
        if hit.conv_id != conv.conv_id() || !hit.covers_turn(conv, turn) {
            continue;
        }
        if !workers
            .get(&a.worker_id)
            .is_some_and(|w| w.qualified && !w.excluded)
        {
            continue;
        }
        if a.labels.len() != hit.len() {
            return Err(QualityError::AnnotationLength {
                worker_id: a.worker_id.clone(),
                hit_id: a.hit_id.clone(),
                expected: hit.len(),
                got: a.labels.len(),
            });
        }
        per_worker
            .entry(a.worker_id.as_str())
            .and_modify(|cur| {
                if hit.chunk_index < cur.0.chunk_index {
                    *cur = (hit, a);
                }
            })
            .or_insert((hit, a));
    }
    let (best, hit, annotation) = per_worker
        .into_iter()
        .map(|(id, (hit, a))| {
            let w = &workers[id];
            let best = BestWorker {
                worker_id: id.to_string(),
                mean_f1: w.mean_f1().unwrap_or(0.0),
                hit_count: w.hit_count,
                hit_id: hit.hit_id.clone(),
            };
            (best, hit, a)
        })
        .min_by(|x, y| rank(&x.0, &y.0))
        .ok_or(QualityError::UnlabeledTurn(turn))?;
    let start = conv.turn_offset(turn) - hit.token_start;
    let end = conv.turn_offset(turn + 1) - hit.token_start;
    Ok(TurnLabels {
        turn,
        best,
        labels: annotation.labels[start..end].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationAggregate {
    /// Aggregated removals with `source = gold`.
    pub labels: LabelSet,
    pub turns: Vec<TurnLabels>,
    pub unlabeled_turns: Vec<usize>,
}

/// Runs [`aggregate_best_worker`] over every turn of `conv`. Turns without a
/// qualified covering annotation are listed rather than failing the whole
/// conversation.
pub fn aggregate_conversation(
    conv: &Conversation,
    hits: &BTreeMap<String, Hit>,
    annotations: &[Annotation],
    workers: &BTreeMap<String, WorkerRecord>,
) -> Result<ConversationAggregate, QualityError> {
    let mut turns = Vec::new();
    let mut unlabeled_turns = Vec::new();
    let mut removals = Vec::new();
    for t in 0..conv.turns().len() {
        match aggregate_best_worker(conv, t, hits, annotations, workers) {
            Ok(tl) => {
                for (id, label) in conv.turns()[t].tokens().map(|tok| tok.id).zip(&tl.labels) {
                    if let Some(c) = label {
                        removals.push((id, *c));
                    }
                }
                turns.push(tl);
            }
            Err(QualityError::UnlabeledTurn(t)) => unlabeled_turns.push(t),
            Err(e) => return Err(e),
        }
    }
    Ok(ConversationAggregate {
        labels: LabelSet::with_removals(conv.conv_id(), LabelSource::Gold, removals),
        turns,
        unlabeled_turns,
    })
}
