use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    parse_markup, remove_disfluencies, strip_markers_traced, CleanupTrace, MarkupOptions,
    ParseError, RemovalReason, RemovedSpan, Span,
};
use crate::model::{
    Category, Conversation, LabelSet, LabelSource, ModelError, Split, TokenId, TurnRecord,
};

/// A transcript whose slash units are still markup strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawConversation {
    pub conv_id: String,
    pub split: Split,
    pub turns: Vec<RawTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTurn {
    pub speaker: String,
    pub slash_units: Vec<String>,
}

impl From<&Conversation> for RawConversation {
    fn from(conv: &Conversation) -> Self {
        RawConversation {
            conv_id: conv.conv_id().to_string(),
            split: conv.split(),
            turns: conv
                .turns()
                .iter()
                .map(|t| RawTurn {
                    speaker: t.speaker.clone(),
                    slash_units: t
                        .slash_units
                        .iter()
                        .map(|u| {
                            u.iter()
                                .map(|tok| tok.text.as_str())
                                .collect::<Vec<_>>()
                                .join(" ")
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("{conv_id}: turn {turn}, slash unit {slash_unit}: {source}")]
    Parse {
        conv_id: String,
        turn: usize,
        slash_unit: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanedUnit {
    pub tokens: Vec<String>,
    pub trace: CleanupTrace,
}

/// Parse, strip markers and remove disfluencies for one slash unit.
pub fn clean_markup(raw: &str, opts: MarkupOptions) -> Result<CleanedUnit, ParseError> {
    let nodes = parse_markup(raw)?;
    let (nodes, stripped) = strip_markers_traced(nodes, opts);
    let (tokens, mut trace) = remove_disfluencies(&nodes);
    trace.merge(CleanupTrace {
        kept: Vec::new(),
        removed: stripped,
    });
    Ok(CleanedUnit { tokens, trace })
}

/// Trace record for one raw slash unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTrace {
    pub turn: usize,
    pub slash_unit: usize,
    /// Turn index in the cleaned conversation, if the unit survived.
    pub output_turn: Option<usize>,
    pub raw: String,
    pub kept: Vec<Span>,
    pub removed: Vec<RemovedSpan>,
}

/// Trace sidecar record: one per conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTrace {
    pub conv_id: String,
    pub units: Vec<UnitTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub conversation: Conversation,
    pub trace: ConversationTrace,
}

fn parse_err(
    conv_id: &str,
    turn: usize,
    slash_unit: usize,
) -> impl FnOnce(ParseError) -> PreprocessError + '_ {
    move |source| PreprocessError::Parse {
        conv_id: conv_id.to_string(),
        turn,
        slash_unit,
        source,
    }
}

/// Cleans every slash unit; units left empty are dropped, then turns left
/// empty are dropped and the remaining turns renumbered densely.
pub fn preprocess_conversation(
    raw: &RawConversation,
    opts: MarkupOptions,
) -> Result<Preprocessed, PreprocessError> {
    let mut turns = Vec::new();
    let mut units_trace = Vec::new();
    for (ti, turn) in raw.turns.iter().enumerate() {
        let mut units = Vec::new();
        let first_trace = units_trace.len();
        for (ui, unit) in turn.slash_units.iter().enumerate() {
            let cleaned = clean_markup(unit, opts).map_err(parse_err(&raw.conv_id, ti, ui))?;
            let survived = !cleaned.tokens.is_empty();
            units_trace.push(UnitTrace {
                turn: ti,
                slash_unit: ui,
                output_turn: None,
                raw: unit.clone(),
                kept: cleaned.trace.kept,
                removed: cleaned.trace.removed,
            });
            if survived {
                units_trace.last_mut().unwrap().output_turn = Some(turns.len());
                units.push(cleaned.tokens);
            }
        }
        if units.is_empty() {
            for t in &mut units_trace[first_trace..] {
                t.output_turn = None;
            }
        } else {
            turns.push(TurnRecord {
                speaker: turn.speaker.clone(),
                slash_units: units,
            });
        }
    }
    let conversation = Conversation::new(raw.conv_id.clone(), raw.split, turns)?;
    Ok(Preprocessed {
        conversation,
        trace: ConversationTrace {
            conv_id: raw.conv_id.clone(),
            units: units_trace,
        },
    })
}

/// The marker-stripped transcript with its disfluency words still present,
/// plus which of those words preprocessing removes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisfluencyAnnotation {
    /// All spoken words after marker stripping.
    pub full: Conversation,
    /// Reparandum and interregnum tokens of `full`, as single-turn gold.
    pub disfluencies: LabelSet,
    /// The preprocessed conversation.
    pub cleaned: Conversation,
    /// Token id in `full` for each flat token index of `cleaned`.
    pub cleaned_to_full: Vec<TokenId>,
}

/// Builds single-turn disfluency gold from markup: the words of reparanda and
/// interregna are labeled (category `Others`) in the marker-stripped transcript.
pub fn annotate_disfluencies(
    raw: &RawConversation,
    opts: MarkupOptions,
) -> Result<DisfluencyAnnotation, PreprocessError> {
    struct Word {
        text: String,
        kept: bool,
    }
    let mut full_turns = Vec::new();
    let mut flags: Vec<Vec<bool>> = Vec::new();
    for (ti, turn) in raw.turns.iter().enumerate() {
        let mut units = Vec::new();
        let mut turn_flags = Vec::new();
        for (ui, unit) in turn.slash_units.iter().enumerate() {
            let cleaned = clean_markup(unit, opts).map_err(parse_err(&raw.conv_id, ti, ui))?;
            let mut words: Vec<(usize, Word)> = cleaned
                .trace
                .kept
                .iter()
                .map(|s| {
                    (
                        s.start,
                        Word {
                            text: unit[s.clone()].to_string(),
                            kept: true,
                        },
                    )
                })
                .chain(cleaned.trace.removed.iter().filter_map(|r| {
                    let disfluent = matches!(
                        r.reason,
                        RemovalReason::Reparandum | RemovalReason::Interregnum
                    );
                    match (&r.word, disfluent) {
                        (Some(w), true) => Some((
                            r.span.start,
                            Word {
                                text: w.clone(),
                                kept: false,
                            },
                        )),
                        _ => None,
                    }
                }))
                .collect();
            if words.is_empty() {
                continue;
            }
            words.sort_by_key(|(start, _)| *start);
            turn_flags.extend(words.iter().map(|(_, w)| w.kept));
            units.push(words.into_iter().map(|(_, w)| w.text).collect());
        }
        if !units.is_empty() {
            full_turns.push(TurnRecord {
                speaker: turn.speaker.clone(),
                slash_units: units,
            });
            flags.push(turn_flags);
        }
    }
    let full = Conversation::new(raw.conv_id.clone(), raw.split, full_turns)?;
    let cleaned = preprocess_conversation(raw, opts)?.conversation;
    let mut disfluencies = LabelSet::new(raw.conv_id.clone(), LabelSource::Gold);
    let mut cleaned_to_full = Vec::with_capacity(cleaned.token_count());
    for (turn, turn_flags) in flags.iter().enumerate() {
        for (position, kept) in turn_flags.iter().enumerate() {
            let id = TokenId::new(turn, position);
            if *kept {
                cleaned_to_full.push(id);
            } else {
                disfluencies.removals.insert(id, Category::Others);
            }
        }
    }
    debug_assert_eq!(cleaned_to_full.len(), cleaned.token_count());
    Ok(DisfluencyAnnotation {
        full,
        disfluencies,
        cleaned,
        cleaned_to_full,
    })
}
