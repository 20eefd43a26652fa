use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Positional token address within a conversation.
///
/// `turn` is the ordinal of the owning turn and `position` the ordinal of the
/// token within that turn, counted across slash units. Together with the
/// conversation id this is the stable identity every label refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId {
    pub turn: usize,
    pub position: usize,
}

impl TokenId {
    pub const fn new(turn: usize, position: usize) -> Self {
        Self { turn, position }
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.turn, self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: TokenId,
    pub text: String,
}

impl Token {
    pub fn turn_index(&self) -> usize {
        self.id.turn
    }

    pub fn position(&self) -> usize {
        self.id.position
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: String,
    pub slash_units: Vec<Vec<Token>>,
}

impl Turn {
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.slash_units.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.slash_units.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    #[default]
    Unsplit,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unsplit => "unsplit",
        })
    }
}

/// Wire form of one turn in the canonical transcript format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub speaker: String,
    pub slash_units: Vec<Vec<String>>,
}

/// Wire form of a conversation: one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub conv_id: String,
    pub split: Split,
    pub turns: Vec<TurnRecord>,
}

/// A cleaned transcript with positional token identities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConversationRecord", into = "ConversationRecord")]
pub struct Conversation {
    conv_id: String,
    split: Split,
    turns: Vec<Turn>,
    /// `offsets[t]` is the flat index of the first token of turn `t`;
    /// the trailing entry is the total token count.
    offsets: Vec<usize>,
}

fn valid_token(text: &str) -> bool {
    !text.is_empty() && !text.chars().any(char::is_whitespace)
}

impl Conversation {
    /// Builds a conversation from slash-unit token strings, assigning ids.
    pub fn new(
        conv_id: impl Into<String>,
        split: Split,
        turns: Vec<TurnRecord>,
    ) -> Result<Self, ModelError> {
        let conv_id = conv_id.into();
        if conv_id.is_empty() {
            return Err(ModelError::EmptyConversationId);
        }
        let mut built = Vec::with_capacity(turns.len());
        let mut offsets = Vec::with_capacity(turns.len() + 1);
        let mut flat = 0;
        for (turn_index, record) in turns.into_iter().enumerate() {
            if record.slash_units.is_empty() {
                return Err(ModelError::EmptyTurn {
                    conv_id,
                    turn: turn_index,
                });
            }
            offsets.push(flat);
            let mut position = 0;
            let mut units = Vec::with_capacity(record.slash_units.len());
            for (unit_index, unit) in record.slash_units.into_iter().enumerate() {
                if unit.is_empty() {
                    return Err(ModelError::EmptySlashUnit {
                        conv_id,
                        turn: turn_index,
                        unit: unit_index,
                    });
                }
                let mut tokens = Vec::with_capacity(unit.len());
                for text in unit {
                    if !valid_token(&text) {
                        return Err(ModelError::InvalidToken {
                            conv_id,
                            turn: turn_index,
                            position,
                            text,
                        });
                    }
                    tokens.push(Token {
                        id: TokenId::new(turn_index, position),
                        text,
                    });
                    position += 1;
                }
                units.push(tokens);
            }
            flat += position;
            built.push(Turn {
                speaker: record.speaker,
                slash_units: units,
            });
        }
        offsets.push(flat);
        Ok(Self {
            conv_id,
            split,
            turns: built,
            offsets,
        })
    }

    pub fn conv_id(&self) -> &str {
        &self.conv_id
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn token_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// All tokens in reading order.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.turns.iter().flat_map(Turn::tokens)
    }

    pub fn token_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.tokens().map(|t| t.id)
    }

    /// Flat index of the first token of `turn`; `turn == turns().len()` gives
    /// the total token count.
    pub fn turn_offset(&self, turn: usize) -> usize {
        self.offsets[turn]
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.turn < self.turns.len() && id.position < self.turns[id.turn].len()
    }

    pub fn flat_index(&self, id: TokenId) -> Option<usize> {
        self.contains(id)
            .then(|| self.offsets[id.turn] + id.position)
    }

    /// Token id at a flat reading-order index.
    pub fn id_at(&self, flat: usize) -> Option<TokenId> {
        if flat >= self.token_count() {
            return None;
        }
        let turn = self.offsets.partition_point(|&o| o <= flat) - 1;
        Some(TokenId::new(turn, flat - self.offsets[turn]))
    }

    pub fn token(&self, id: TokenId) -> Option<&Token> {
        if !self.contains(id) {
            return None;
        }
        self.turns[id.turn].tokens().nth(id.position)
    }

    pub fn to_record(&self) -> ConversationRecord {
        ConversationRecord {
            conv_id: self.conv_id.clone(),
            split: self.split,
            turns: self
                .turns
                .iter()
                .map(|t| TurnRecord {
                    speaker: t.speaker.clone(),
                    slash_units: t
                        .slash_units
                        .iter()
                        .map(|u| u.iter().map(|tok| tok.text.clone()).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ConversationRecord> for Conversation {
    type Error = ModelError;

    fn try_from(record: ConversationRecord) -> Result<Self, Self::Error> {
        Conversation::new(record.conv_id, record.split, record.turns)
    }
}

impl From<Conversation> for ConversationRecord {
    fn from(conv: Conversation) -> Self {
        conv.to_record()
    }
}
