//! End-to-end cleanup flows.
//!
//! Two-stage: a single-turn detector labels each slash unit, its removals are
//! redacted, and a multi-turn detector runs over overlapping chunks of what
//! is left. Combined: one multi-turn detector over chunks of the unredacted
//! conversation. Both return labels keyed by original token ids.
//!
//! Corpus-level entry points gather every detector call of a phase into one
//! batch, so external detectors start one process per job rather than one per
//! conversation.

mod eval;
mod render;
mod union;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{chunk_for_inference, reassemble, ChunkError};
use crate::detectors::{Detector, DetectorError, DetectorInput, Scope};
use crate::model::{
    Category, Conversation, LabelSet, LabelSource, ModelError, PipelineConfig, TokenId, TurnRecord,
};
use crate::par::Executor;

pub use eval::{
    evaluate, evaluate_corpus, CategoryRecall, ConversationScore, CorpusEvaluation, Evaluation,
};
pub use render::{render_clean, render_marked};
pub use union::{union_example, Origin, UnionExample, UnionRemoval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Std,
    Mtd,
    Combined,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Std => "single-turn stage",
            Stage::Mtd => "multi-turn stage",
            Stage::Combined => "combined pass",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("{stage}: {source}")]
    Detector {
        stage: Stage,
        #[source]
        source: DetectorError,
    },
    #[error("{stage}: {source}")]
    Chunk {
        stage: Stage,
        #[source]
        source: ChunkError,
    },
    #[error("{stage}: detector scope is {found:?}, expected {expected:?}")]
    ScopeMismatch {
        stage: Stage,
        expected: Scope,
        found: Scope,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_scope(stage: Stage, det: &dyn Detector, expected: Scope) -> Result<(), PipelineError> {
    let found = det.spec().scope;
    if found != expected {
        return Err(PipelineError::ScopeMismatch {
            stage,
            expected,
            found,
        });
    }
    Ok(())
}

/// A conversation with some tokens removed. `back_map[i]` is the original
/// id of flat token `i` of `conversation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redacted {
    pub conversation: Conversation,
    pub back_map: Vec<TokenId>,
}

/// Removes every labeled token; slash units and turns left empty are dropped.
pub fn redact(conv: &Conversation, labels: &LabelSet) -> Result<Redacted, PipelineError> {
    labels.validate_against(conv)?;
    let mut back_map = Vec::new();
    let mut turns = Vec::new();
    for turn in conv.turns() {
        let units: Vec<Vec<String>> = turn
            .slash_units
            .iter()
            .map(|unit| {
                unit.iter()
                    .filter(|t| !labels.contains(t.id))
                    .map(|t| {
                        back_map.push(t.id);
                        t.text.clone()
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|u| !u.is_empty())
            .collect();
        if !units.is_empty() {
            turns.push(TurnRecord {
                speaker: turn.speaker.clone(),
                slash_units: units,
            });
        }
    }
    Ok(Redacted {
        conversation: Conversation::new(conv.conv_id(), conv.split(), turns)?,
        back_map,
    })
}

fn std_source() -> LabelSource {
    LabelSource::Prediction("std".into())
}

fn mtd_source() -> LabelSource {
    LabelSource::Prediction("mtd".into())
}

/// Single-turn detection on every slash unit of every conversation. Units
/// longer than the detector's `max_seq` are cut into consecutive pieces.
pub fn run_std_corpus(
    convs: &[Conversation],
    std: &dyn Detector,
    exec: &Executor,
) -> Result<Vec<LabelSet>, PipelineError> {
    check_scope(Stage::Std, std, Scope::SingleTurn)?;
    let max_seq = std.spec().max_seq.max(1);
    let mut inputs = Vec::new();
    let mut owner = Vec::new();
    for (c, conv) in convs.iter().enumerate() {
        for (t, turn) in conv.turns().iter().enumerate() {
            for (u, unit) in turn.slash_units.iter().enumerate() {
                for (k, piece) in unit.chunks(max_seq).enumerate() {
                    let id = format!("{}/t{t}/u{u}/p{k}", conv.conv_id());
                    inputs.push(DetectorInput::unit(
                        id,
                        conv.conv_id(),
                        &turn.speaker,
                        piece,
                    ));
                    owner.push(c);
                }
            }
        }
    }
    let outputs = std
        .detect_batch(&inputs, exec)
        .map_err(|source| PipelineError::Detector {
            stage: Stage::Std,
            source,
        })?;
    let mut removals: Vec<Vec<(TokenId, Category)>> = vec![Vec::new(); convs.len()];
    for ((input, labels), c) in inputs.iter().zip(&outputs).zip(owner) {
        if labels.len() != input.len() {
            return Err(PipelineError::Detector {
                stage: Stage::Std,
                source: DetectorError::LengthMismatch {
                    chunk_id: input.chunk_id.clone(),
                    expected: input.len(),
                    got: labels.len(),
                },
            });
        }
        for (id, label) in input.ids.iter().zip(labels) {
            if let Some(cat) = label {
                removals[c].push((*id, *cat));
            }
        }
    }
    Ok(convs
        .iter()
        .zip(removals)
        .map(|(conv, r)| LabelSet::with_removals(conv.conv_id(), std_source(), r))
        .collect())
}

pub fn run_std(
    conv: &Conversation,
    std: &dyn Detector,
    exec: &Executor,
) -> Result<LabelSet, PipelineError> {
    Ok(run_std_corpus(std::slice::from_ref(conv), std, exec)?.remove(0))
}

/// Multi-turn detection over overlapping inference chunks of each view,
/// OR-merged and reported under original ids.
fn run_chunked(
    views: &[(&Conversation, Option<&[TokenId]>)],
    det: &dyn Detector,
    cfg: &PipelineConfig,
    exec: &Executor,
    stage: Stage,
    source: LabelSource,
) -> Result<Vec<LabelSet>, PipelineError> {
    check_scope(stage, det, Scope::MultiTurn)?;
    let chunk_err = |source| PipelineError::Chunk { stage, source };
    let mut plans = Vec::with_capacity(views.len());
    let mut inputs = Vec::new();
    for (conv, original) in views {
        let hits = if conv.is_empty() {
            Vec::new()
        } else {
            chunk_for_inference(
                conv,
                det.spec().max_seq,
                cfg.chunk_overlap_fraction,
                cfg.chunk_alignment,
            )
            .map_err(chunk_err)?
        };
        for h in &hits {
            inputs.push(DetectorInput::from_span(
                h.hit_id.clone(),
                conv,
                h.token_start..h.token_end,
                *original,
            ));
        }
        plans.push(hits);
    }
    let mut outputs = det
        .detect_batch(&inputs, exec)
        .map_err(|source| PipelineError::Detector { stage, source })?
        .into_iter();
    let mut results = Vec::with_capacity(views.len());
    for ((conv, original), hits) in views.iter().zip(plans) {
        let chunk_labels: Vec<_> = outputs.by_ref().take(hits.len()).collect();
        let mut removals = Vec::new();
        if !hits.is_empty() {
            let flat = reassemble(conv, &hits, &chunk_labels).map_err(chunk_err)?;
            for (i, label) in flat.iter().enumerate() {
                if let Some(cat) = label {
                    let id = match original {
                        Some(o) => o[i],
                        None => conv.id_at(i).expect("in range"),
                    };
                    removals.push((id, *cat));
                }
            }
        }
        results.push(LabelSet::with_removals(
            conv.conv_id(),
            source.clone(),
            removals,
        ));
    }
    Ok(results)
}

/// Labels from each stage of a two-stage run, all keyed by original ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStageOutput {
    pub stage1: LabelSet,
    pub stage2: LabelSet,
    pub union: LabelSet,
}

fn union_of(a: &LabelSet, b: &LabelSet, source: LabelSource) -> LabelSet {
    let mut removals = a.removals.clone();
    for (id, cat) in &b.removals {
        removals.entry(*id).or_insert(*cat);
    }
    LabelSet {
        conv_id: a.conv_id.clone(),
        source,
        removals,
    }
}

pub fn run_two_stage_corpus(
    convs: &[Conversation],
    std: &dyn Detector,
    mtd: &dyn Detector,
    cfg: &PipelineConfig,
    exec: &Executor,
) -> Result<Vec<TwoStageOutput>, PipelineError> {
    check_scope(Stage::Mtd, mtd, Scope::MultiTurn)?;
    let stage1 = run_std_corpus(convs, std, exec)?;
    let redacted: Vec<Redacted> = convs
        .iter()
        .zip(&stage1)
        .map(|(c, l)| redact(c, l))
        .collect::<Result<_, _>>()?;
    let views: Vec<_> = redacted
        .iter()
        .map(|r| (&r.conversation, Some(r.back_map.as_slice())))
        .collect();
    let stage2 = run_chunked(&views, mtd, cfg, exec, Stage::Mtd, mtd_source())?;
    Ok(stage1
        .into_iter()
        .zip(stage2)
        .map(|(s1, s2)| TwoStageOutput {
            union: union_of(&s1, &s2, LabelSource::Prediction("two-stage".into())),
            stage1: s1,
            stage2: s2,
        })
        .collect())
}

pub fn run_two_stage(
    conv: &Conversation,
    std: &dyn Detector,
    mtd: &dyn Detector,
    cfg: &PipelineConfig,
    exec: &Executor,
) -> Result<TwoStageOutput, PipelineError> {
    Ok(run_two_stage_corpus(std::slice::from_ref(conv), std, mtd, cfg, exec)?.remove(0))
}

pub fn run_combined_corpus(
    convs: &[Conversation],
    det: &dyn Detector,
    cfg: &PipelineConfig,
    exec: &Executor,
) -> Result<Vec<LabelSet>, PipelineError> {
    let views: Vec<_> = convs.iter().map(|c| (c, None)).collect();
    run_chunked(
        &views,
        det,
        cfg,
        exec,
        Stage::Combined,
        LabelSource::Prediction("combined".into()),
    )
}

pub fn run_combined(
    conv: &Conversation,
    det: &dyn Detector,
    cfg: &PipelineConfig,
    exec: &Executor,
) -> Result<LabelSet, PipelineError> {
    Ok(run_combined_corpus(std::slice::from_ref(conv), det, cfg, exec)?.remove(0))
}
