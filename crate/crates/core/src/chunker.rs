//! Overlapping chunks of a conversation, and OR-merge of per-chunk labels.
//!
//! Annotation chunks (HITs) are the smallest turn-aligned span holding at
//! least `chunk_target_tokens`; successive chunks start roughly
//! `target × (1 − overlap)` tokens apart, snapped to the nearest turn
//! boundary. Inference chunks instead take the largest span that fits a
//! model's sequence budget, counting one `[SEP]` per interior turn boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Category, ChunkAlignment, Conversation, LabelSet, LabelSource, PipelineConfig, TokenId,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChunkError {
    #[error("conversation {0} has no tokens")]
    EmptyConversation(String),
    #[error("turn {turn} has {len} tokens, more than the chunk size {limit}")]
    TurnTooLong {
        turn: usize,
        len: usize,
        limit: usize,
    },
    #[error("token {0} is not covered by any chunk")]
    UncoveredToken(TokenId),
    #[error("chunk {hit_id}: expected {expected} labels, got {got}")]
    LabelLengthMismatch {
        hit_id: String,
        expected: usize,
        got: usize,
    },
    #[error("chunk {hit_id} extends past the end of the conversation")]
    OutOfRange { hit_id: String },
}

/// One chunk of a conversation. Token ranges are flat reading-order indices,
/// half-open; `turn_start..turn_end` are the turns the chunk touches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub hit_id: String,
    pub conv_id: String,
    pub chunk_index: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub turn_start: usize,
    pub turn_end: usize,
    /// Tokens shared with the previous chunk.
    pub overlap_left: [usize; 2],
    /// Tokens shared with the next chunk.
    pub overlap_right: [usize; 2],
}

impl Hit {
    pub fn len(&self) -> usize {
        self.token_end - self.token_start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn token_ids<'a>(&self, conv: &'a Conversation) -> impl Iterator<Item = TokenId> + 'a {
        (self.token_start..self.token_end).filter_map(|i| conv.id_at(i))
    }

    /// True when every token of `turn` lies inside the chunk.
    pub fn covers_turn(&self, conv: &Conversation, turn: usize) -> bool {
        turn < conv.turns().len()
            && conv.turn_offset(turn) >= self.token_start
            && conv.turn_offset(turn + 1) <= self.token_end
    }

    /// The chunk's slice of a conversation-level label set.
    pub fn labels_from(&self, conv: &Conversation, labels: &LabelSet) -> Vec<Option<Category>> {
        self.token_ids(conv).map(|id| labels.get(id)).collect()
    }
}

pub fn hit_id(conv_id: &str, chunk_index: usize) -> String {
    format!("{conv_id}_{chunk_index:03}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Size {
    /// Smallest aligned span with at least this many tokens.
    AtLeast(usize),
    /// Largest aligned span whose cost (tokens plus separators) fits.
    AtMost(usize),
}

/// Units a chunk boundary may fall between.
struct Units {
    /// Flat offset of each unit start, plus the total token count.
    bounds: Vec<usize>,
    /// Owning turn of each unit.
    turn: Vec<usize>,
}

impl Units {
    fn new(conv: &Conversation, alignment: ChunkAlignment) -> Self {
        let turns = conv.turns().len();
        match alignment {
            ChunkAlignment::Turn => Units {
                bounds: (0..=turns).map(|t| conv.turn_offset(t)).collect(),
                turn: (0..turns).collect(),
            },
            ChunkAlignment::Token => Units {
                bounds: (0..=conv.token_count()).collect(),
                turn: conv.token_ids().map(|id| id.turn).collect(),
            },
        }
    }

    fn count(&self) -> usize {
        self.turn.len()
    }

    fn tokens(&self, s: usize, e: usize) -> usize {
        self.bounds[e] - self.bounds[s]
    }

    fn cost(&self, s: usize, e: usize, separators: bool) -> usize {
        let seps = if separators && e > s {
            self.turn[e - 1] - self.turn[s]
        } else {
            0
        };
        self.tokens(s, e) + seps
    }
}

fn chunk_with(
    conv: &Conversation,
    size: Size,
    overlap: f64,
    alignment: ChunkAlignment,
    separators: bool,
) -> Result<Vec<Hit>, ChunkError> {
    if conv.token_count() == 0 {
        return Err(ChunkError::EmptyConversation(conv.conv_id().to_string()));
    }
    let units = Units::new(conv, alignment);
    let m = units.count();
    let limit = match size {
        Size::AtLeast(n) | Size::AtMost(n) => n,
    };
    for u in 0..m {
        if units.cost(u, u + 1, separators) > limit {
            return Err(ChunkError::TurnTooLong {
                turn: units.turn[u],
                len: units.tokens(u, u + 1),
                limit,
            });
        }
    }

    let mut spans = Vec::new();
    let mut s = 0;
    loop {
        let e = match size {
            Size::AtLeast(target) => (s + 1..=m)
                .find(|&e| units.tokens(s, e) >= target)
                .unwrap_or(m),
            Size::AtMost(budget) => (s + 1..=m)
                .take_while(|&e| units.cost(s, e, separators) <= budget)
                .last()
                .unwrap_or(s + 1),
        };
        spans.push((s, e));
        if e == m {
            break;
        }
        let stride = match size {
            Size::AtLeast(target) => target as f64 * (1.0 - overlap),
            Size::AtMost(_) => units.tokens(s, e) as f64 * (1.0 - overlap),
        };
        let mut next = s + 1;
        let mut best = f64::INFINITY;
        for cand in s + 1..=e {
            let d = (units.tokens(s, cand) as f64 - stride).abs();
            if d < best {
                best = d;
                next = cand;
            }
        }
        s = next;
    }

    let bounds = &units.bounds;
    let hits = spans
        .iter()
        .enumerate()
        .map(|(k, &(s, e))| {
            let token_start = bounds[s];
            let token_end = bounds[e];
            let overlap_left = match k.checked_sub(1).map(|p| bounds[spans[p].1]) {
                Some(prev_end) if prev_end > token_start => [token_start, prev_end],
                _ => [token_start, token_start],
            };
            let overlap_right = match spans.get(k + 1).map(|n| bounds[n.0]) {
                Some(next_start) if next_start < token_end => [next_start, token_end],
                _ => [token_end, token_end],
            };
            Hit {
                hit_id: hit_id(conv.conv_id(), k),
                conv_id: conv.conv_id().to_string(),
                chunk_index: k,
                token_start,
                token_end,
                turn_start: units.turn[s],
                turn_end: units.turn[e - 1] + 1,
                overlap_left,
                overlap_right,
            }
        })
        .collect();
    Ok(hits)
}

/// Splits a conversation into annotation chunks per `cfg`.
///
/// With turn alignment, a turn longer than `chunk_target_tokens` is an error.
pub fn chunk_conversation(
    conv: &Conversation,
    cfg: &PipelineConfig,
) -> Result<Vec<Hit>, ChunkError> {
    chunk_with(
        conv,
        Size::AtLeast(cfg.chunk_target_tokens),
        cfg.chunk_overlap_fraction,
        cfg.chunk_alignment,
        false,
    )
}

/// Chunks for a multi-turn detector with a `max_seq` budget that counts one
/// separator per interior turn boundary. Falls back to token alignment when
/// a single turn does not fit.
pub fn chunk_for_inference(
    conv: &Conversation,
    max_seq: usize,
    overlap: f64,
    alignment: ChunkAlignment,
) -> Result<Vec<Hit>, ChunkError> {
    match chunk_with(conv, Size::AtMost(max_seq), overlap, alignment, true) {
        Err(ChunkError::TurnTooLong { .. }) if alignment == ChunkAlignment::Turn => chunk_with(
            conv,
            Size::AtMost(max_seq),
            overlap,
            ChunkAlignment::Token,
            true,
        ),
        other => other,
    }
}

/// OR-merges per-chunk labels into one label per conversation token.
///
/// A token is positive if any covering chunk marks it; when chunks disagree on
/// the category, the chunk with the lowest `chunk_index` wins.
pub fn reassemble(
    conv: &Conversation,
    hits: &[Hit],
    chunk_labels: &[Vec<Option<Category>>],
) -> Result<Vec<Option<Category>>, ChunkError> {
    let n = conv.token_count();
    let mut merged: Vec<Option<Category>> = vec![None; n];
    let mut covered = vec![false; n];
    let mut order: Vec<usize> = (0..hits.len()).collect();
    order.sort_by_key(|&i| hits[i].chunk_index);
    for i in order {
        let hit = &hits[i];
        let labels = chunk_labels.get(i).map(Vec::as_slice).unwrap_or(&[]);
        if labels.len() != hit.len() {
            return Err(ChunkError::LabelLengthMismatch {
                hit_id: hit.hit_id.clone(),
                expected: hit.len(),
                got: labels.len(),
            });
        }
        if hit.token_end > n {
            return Err(ChunkError::OutOfRange {
                hit_id: hit.hit_id.clone(),
            });
        }
        for (offset, label) in labels.iter().enumerate() {
            let flat = hit.token_start + offset;
            covered[flat] = true;
            if merged[flat].is_none() {
                merged[flat] = *label;
            }
        }
    }
    if let Some(flat) = covered.iter().position(|c| !c) {
        return Err(ChunkError::UncoveredToken(
            conv.id_at(flat).expect("in range"),
        ));
    }
    Ok(merged)
}

/// Converts flat per-token labels into a label set.
pub fn to_label_set(
    conv: &Conversation,
    flat: &[Option<Category>],
    source: LabelSource,
) -> LabelSet {
    LabelSet::with_removals(
        conv.conv_id(),
        source,
        flat.iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (conv.id_at(i).expect("in range"), c))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Split, TurnRecord};

    fn conv_with_turns(lens: &[usize]) -> Conversation {
        let turns = lens
            .iter()
            .enumerate()
            .map(|(t, &n)| TurnRecord {
                speaker: if t % 2 == 0 { "A" } else { "B" }.into(),
                slash_units: vec![(0..n).map(|i| format!("w{t}_{i}")).collect()],
            })
            .collect();
        Conversation::new("c", Split::Unsplit, turns).unwrap()
    }

    #[test]
    fn six_hundred_tokens_make_three_chunks() {
        let conv = conv_with_turns(&[10; 60]);
        let hits = chunk_conversation(&conv, &PipelineConfig::default()).unwrap();
        let ranges: Vec<_> = hits.iter().map(|h| (h.turn_start, h.turn_end)).collect();
        assert_eq!(ranges, vec![(0, 30), (15, 45), (30, 60)]);
        assert_eq!(hits[1].overlap_left, [150, 300]);
        assert_eq!(hits[1].overlap_right, [300, 450]);
        assert_eq!(hits[0].overlap_left, [0, 0]);
        assert_eq!(hits[1].hit_id, "c_001");
    }

    #[test]
    fn short_conversation_is_one_chunk() {
        let conv = conv_with_turns(&[12; 10]);
        let hits = chunk_conversation(&conv, &PipelineConfig::default()).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].token_start, hits[0].token_end), (0, 120));
    }

    #[test]
    fn overlong_turn_is_an_error() {
        let conv = conv_with_turns(&[10, 301, 10]);
        assert_eq!(
            chunk_conversation(&conv, &PipelineConfig::default()),
            Err(ChunkError::TurnTooLong {
                turn: 1,
                len: 301,
                limit: 300
            })
        );
        let cfg = PipelineConfig {
            chunk_alignment: ChunkAlignment::Token,
            ..Default::default()
        };
        let hits = chunk_conversation(&conv, &cfg).unwrap();
        assert_eq!(hits[0].len(), 300);
    }

    #[test]
    fn empty_conversation_is_an_error() {
        let conv = Conversation::new("e", Split::Unsplit, vec![]).unwrap();
        assert!(matches!(
            chunk_conversation(&conv, &PipelineConfig::default()),
            Err(ChunkError::EmptyConversation(_))
        ));
    }

    #[test]
    fn inference_chunks_fit_the_budget_with_separators() {
        let conv = conv_with_turns(&[5; 40]);
        let hits = chunk_for_inference(&conv, 64, 0.5, ChunkAlignment::Turn).unwrap();
        for h in &hits {
            let seps = h.turn_end - h.turn_start - 1;
            assert!(h.len() + seps <= 64);
        }
        // 10 turns of 5 tokens = 50 + 9 separators; an 11th turn would not fit.
        assert_eq!(hits[0].turn_end, 10);
        assert_eq!(hits[1].turn_start, 5);
    }

    #[test]
    fn inference_falls_back_to_tokens_for_long_turns() {
        let conv = conv_with_turns(&[3, 100, 3]);
        let hits = chunk_for_inference(&conv, 64, 0.5, ChunkAlignment::Turn).unwrap();
        assert!(hits
            .iter()
            .all(|h| h.len() + (h.turn_end - h.turn_start - 1) <= 64));
        assert_eq!(hits.last().unwrap().token_end, 106);
    }

    #[test]
    fn or_merge_truth_table() {
        let conv = conv_with_turns(&[1, 1]);
        let hits = vec![
            Hit {
                hit_id: "a".into(),
                conv_id: "c".into(),
                chunk_index: 0,
                token_start: 0,
                token_end: 2,
                turn_start: 0,
                turn_end: 2,
                overlap_left: [0, 0],
                overlap_right: [0, 2],
            },
            Hit {
                hit_id: "b".into(),
                conv_id: "c".into(),
                chunk_index: 1,
                token_start: 0,
                token_end: 2,
                turn_start: 0,
                turn_end: 2,
                overlap_left: [0, 2],
                overlap_right: [2, 2],
            },
        ];
        let r = Some(Category::RepetitionParaphrase);
        let t = Some(Category::ThinkAloud);
        for (a, b, want) in [(r, None, r), (None, t, t), (None, None, None), (r, t, r)] {
            let merged = reassemble(&conv, &hits, &[vec![a, None], vec![b, None]]).unwrap();
            assert_eq!(merged[0], want);
        }
    }

    #[test]
    fn reassemble_detects_gaps_and_length_errors() {
        let conv = conv_with_turns(&[2, 2]);
        let hits = chunk_conversation(&conv, &PipelineConfig::default()).unwrap();
        let mut short = hits.clone();
        short[0].token_end = 3;
        assert_eq!(
            reassemble(&conv, &short, &[vec![None; 3]]),
            Err(ChunkError::UncoveredToken(TokenId::new(1, 1)))
        );
        assert!(matches!(
            reassemble(&conv, &hits, &[vec![None; 1]]),
            Err(ChunkError::LabelLengthMismatch { .. })
        ));
    }
}
