//! Random conversations and label sets for property tests.

use dialclean_core::model::{Category, Conversation, LabelSet, LabelSource, Split, TurnRecord};
use rand::rngs::StdRng;
use rand::Rng;

/// A conversation of exactly `tokens` tokens with alternating speakers and
/// turns of 1..=`max_turn` tokens, split into 1–3 slash units.
pub fn random_conversation(
    rng: &mut StdRng,
    id: &str,
    tokens: usize,
    max_turn: usize,
) -> Conversation {
    let mut turns = Vec::new();
    let mut left = tokens;
    while left > 0 {
        let n = rng.random_range(1..=max_turn).min(left);
        let cut = if n > 1 && rng.random_bool(0.3) {
            rng.random_range(1..n)
        } else {
            n
        };
        let words: Vec<String> = (0..n).map(|i| format!("t{}w{i}", turns.len())).collect();
        let mut units = vec![words[..cut].to_vec()];
        if cut < n {
            units.push(words[cut..].to_vec());
        }
        turns.push(TurnRecord {
            speaker: ["A", "B", "C"][turns.len() % if rng.random_bool(0.1) { 3 } else { 2 }].into(),
            slash_units: units,
        });
        left -= n;
    }
    Conversation::new(id, Split::Unsplit, turns).expect("valid conversation")
}

pub fn random_labels(rng: &mut StdRng, conv: &Conversation, p: f64) -> LabelSet {
    let mut removals = Vec::new();
    for id in conv.token_ids() {
        if rng.random_bool(p) {
            removals.push((id, Category::ALL[rng.random_range(0..Category::ALL.len())]));
        }
    }
    LabelSet::with_removals(conv.conv_id(), LabelSource::Gold, removals)
}
