use serde::{Deserialize, Serialize};

use crate::markup::DisfluencyAnnotation;
use crate::model::{Category, Conversation, LabelSet, LabelSource, ModelError, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Disfluency,
    MultiTurn,
}

/// One removal in a union export: binary, tagged with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionRemoval {
    pub turn: usize,
    pub position: usize,
    pub origin: Origin,
}

/// Disfluency and multi-turn gold on the same marker-stripped transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionExample {
    pub conversation: Conversation,
    pub disfluency: LabelSet,
    /// Multi-turn gold moved onto the ids of `conversation`.
    pub multi_turn: LabelSet,
    /// Both, with nondistinctive (`Others`) categories.
    pub union: LabelSet,
    pub removals: Vec<UnionRemoval>,
}

/// Lifts multi-turn gold labeled on the preprocessed conversation onto the
/// full transcript and joins it with the disfluency gold.
pub fn union_example(
    annotation: &DisfluencyAnnotation,
    multi_turn_gold: &LabelSet,
) -> Result<UnionExample, ModelError> {
    multi_turn_gold.validate_against(&annotation.cleaned)?;
    let lifted: Vec<(TokenId, Category)> = multi_turn_gold
        .removals
        .iter()
        .map(|(id, c)| {
            let flat = annotation.cleaned.flat_index(*id).expect("validated");
            (annotation.cleaned_to_full[flat], *c)
        })
        .collect();
    let conv_id = annotation.full.conv_id();
    let multi_turn = LabelSet::with_removals(conv_id, LabelSource::Gold, lifted);
    let mut removals: Vec<UnionRemoval> = annotation
        .disfluencies
        .removals
        .keys()
        .map(|id| (*id, Origin::Disfluency))
        .chain(
            multi_turn
                .removals
                .keys()
                .map(|id| (*id, Origin::MultiTurn)),
        )
        .map(|(id, origin)| UnionRemoval {
            turn: id.turn,
            position: id.position,
            origin,
        })
        .collect();
    removals.sort_by_key(|r| (r.turn, r.position, r.origin));
    let union = LabelSet::with_removals(
        conv_id,
        LabelSource::Gold,
        removals
            .iter()
            .map(|r| (TokenId::new(r.turn, r.position), Category::Others)),
    );
    Ok(UnionExample {
        conversation: annotation.full.clone(),
        disfluency: annotation.disfluencies.clone(),
        multi_turn,
        union,
        removals,
    })
}
