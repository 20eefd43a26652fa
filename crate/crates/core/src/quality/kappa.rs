use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::workers::Annotation;
use super::QualityError;
use crate::chunker::Hit;
use crate::model::{Category, Conversation};
use crate::par::Executor;

/// Size of the kappa category space: "keep" plus the five removal categories.
pub const KAPPA_CATEGORIES: usize = 1 + Category::ALL.len();

fn category_slot(label: Option<Category>) -> usize {
    label.map_or(0, |c| 1 + c.index())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KappaError {
    #[error("need at least two raters, got {0}")]
    TooFewRaters(usize),
    #[error("rater {rater} labeled {got} tokens, expected {expected}")]
    LengthMismatch {
        rater: usize,
        expected: usize,
        got: usize,
    },
    #[error("no items to rate")]
    NoItems,
}

/// Fleiss' kappa with tokens as items and the six-way keep/category label as
/// the rating. `ratings[r][i]` is rater `r`'s label for token `i`.
///
/// Returns 1.0 when every rating falls in one category (chance agreement is
/// total and so is observed agreement).
pub fn fleiss_kappa(ratings: &[Vec<Option<Category>>]) -> Result<f64, KappaError> {
    let raters = ratings.len();
    if raters < 2 {
        return Err(KappaError::TooFewRaters(raters));
    }
    let items = ratings[0].len();
    if items == 0 {
        return Err(KappaError::NoItems);
    }
    if let Some((rater, r)) = ratings.iter().enumerate().find(|(_, r)| r.len() != items) {
        return Err(KappaError::LengthMismatch {
            rater,
            expected: items,
            got: r.len(),
        });
    }
    let n = raters as f64;
    let mut totals = [0usize; KAPPA_CATEGORIES];
    let mut agreement_sum = 0.0;
    for i in 0..items {
        let mut counts = [0usize; KAPPA_CATEGORIES];
        for r in ratings {
            counts[category_slot(r[i])] += 1;
        }
        let sq: usize = counts.iter().map(|c| c * c).sum();
        agreement_sum += (sq - raters) as f64 / (n * (n - 1.0));
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
    }
    let p_bar = agreement_sum / items as f64;
    let total = (items * raters) as f64;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / total;
            p * p
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// All raters' labels for one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRatings {
    pub conv_id: String,
    pub turn: usize,
    pub raters: Vec<(String, Vec<Option<Category>>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnKappa {
    pub conv_id: String,
    pub turn: usize,
    pub raters: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    /// Unweighted mean over scored turns; `None` when no turn had two raters.
    pub mean: Option<f64>,
    pub turns_scored: usize,
    pub turns_skipped: usize,
    pub per_turn: Vec<TurnKappa>,
}

/// Collects each worker's labels for every turn of `conv` from annotations
/// whose HIT fully covers the turn. A worker with several covering HITs
/// contributes the one with the lowest chunk index. Raters are ordered by
/// worker id.
pub fn turn_ratings(
    conv: &Conversation,
    hits: &BTreeMap<String, Hit>,
    annotations: &[Annotation],
) -> Result<Vec<TurnRatings>, QualityError> {
    let mine: Vec<(&Hit, &Annotation)> = annotations
        .iter()
        .filter_map(|a| hits.get(&a.hit_id).map(|h| (h, a)))
        .filter(|(h, _)| h.conv_id == conv.conv_id())
        .collect();
    for (h, a) in &mine {
        if a.labels.len() != h.len() {
            return Err(QualityError::AnnotationLength {
                worker_id: a.worker_id.clone(),
                hit_id: a.hit_id.clone(),
                expected: h.len(),
                got: a.labels.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(conv.turns().len());
    for turn in 0..conv.turns().len() {
        let mut per_worker: BTreeMap<&str, (&Hit, &Annotation)> = BTreeMap::new();
        for &(h, a) in mine.iter().filter(|(h, _)| h.covers_turn(conv, turn)) {
            per_worker
                .entry(a.worker_id.as_str())
                .and_modify(|cur| {
                    if h.chunk_index < cur.0.chunk_index {
                        *cur = (h, a);
                    }
                })
                .or_insert((h, a));
        }
        let start = conv.turn_offset(turn);
        let end = conv.turn_offset(turn + 1);
        out.push(TurnRatings {
            conv_id: conv.conv_id().to_string(),
            turn,
            raters: per_worker
                .into_iter()
                .map(|(w, (h, a))| {
                    let labels = a.labels[start - h.token_start..end - h.token_start].to_vec();
                    (w.to_string(), labels)
                })
                .collect(),
        });
    }
    Ok(out)
}

/// Per-turn kappa averaged over turns with at least two raters; other turns
/// are skipped rather than scored zero.
pub fn corpus_kappa(turns: &[TurnRatings], exec: &Executor) -> KappaReport {
    let scored: Vec<Option<TurnKappa>> = exec.map(turns, |t| {
        let ratings: Vec<Vec<Option<Category>>> = t.raters.iter().map(|(_, l)| l.clone()).collect();
        fleiss_kappa(&ratings).ok().map(|kappa| TurnKappa {
            conv_id: t.conv_id.clone(),
            turn: t.turn,
            raters: ratings.len(),
            kappa,
        })
    });
    let per_turn: Vec<TurnKappa> = scored.into_iter().flatten().collect();
    let mean = if per_turn.is_empty() {
        None
    } else {
        Some(per_turn.iter().map(|t| t.kappa).sum::<f64>() / per_turn.len() as f64)
    };
    KappaReport {
        mean,
        turns_scored: per_turn.len(),
        turns_skipped: turns.len() - per_turn.len(),
        per_turn,
    }
}
