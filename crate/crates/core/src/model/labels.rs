use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Conversation, ModelError, TokenId};

/// The five discontinuity categories of the cleanup taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    /// Listener signals agreement or attention ("Exactly.", "Uh-huh.").
    AcknowledgmentConfirmation,
    /// Speaker repeats or paraphrases their own words.
    RepetitionParaphrase,
    /// Speaker talks to themselves while thinking.
    ThinkAloud,
    /// Sentence abandoned due to interruption or topic change.
    IncompleteSentences,
    Others,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::AcknowledgmentConfirmation,
        Category::RepetitionParaphrase,
        Category::ThinkAloud,
        Category::IncompleteSentences,
        Category::Others,
    ];

    /// Single-letter code used by the external detector protocol.
    pub fn code(self) -> char {
        match self {
            Category::AcknowledgmentConfirmation => 'A',
            Category::RepetitionParaphrase => 'R',
            Category::ThinkAloud => 'T',
            Category::IncompleteSentences => 'I',
            Category::Others => 'O',
        }
    }

    pub fn from_code(code: char) -> Option<Self> {
        Category::ALL.into_iter().find(|c| c.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::AcknowledgmentConfirmation => "AcknowledgmentConfirmation",
            Category::RepetitionParaphrase => "RepetitionParaphrase",
            Category::ThinkAloud => "ThinkAloud",
            Category::IncompleteSentences => "IncompleteSentences",
            Category::Others => "Others",
        }
    }

    /// Index into [`Category::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .or_else(|| {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Category::from_code(c),
                    _ => None,
                }
            })
            .ok_or_else(|| ModelError::UnknownCategory(s.to_string()))
    }
}

/// Where a label set came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelSource {
    Gold,
    Worker(String),
    Prediction(String),
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSource::Gold => f.write_str("gold"),
            LabelSource::Worker(id) => write!(f, "worker:{id}"),
            LabelSource::Prediction(id) => write!(f, "prediction:{id}"),
        }
    }
}

impl FromStr for LabelSource {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "gold" {
            return Ok(LabelSource::Gold);
        }
        match s.split_once(':') {
            Some(("worker", id)) if !id.is_empty() => Ok(LabelSource::Worker(id.to_string())),
            Some(("prediction", id)) if !id.is_empty() => {
                Ok(LabelSource::Prediction(id.to_string()))
            }
            _ => Err(ModelError::InvalidSource(s.to_string())),
        }
    }
}

impl Serialize for LabelSource {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelSource {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalRecord {
    pub turn: usize,
    pub position: usize,
    pub category: Category,
}

/// Wire form of a label set: one JSON object per conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSetRecord {
    pub conv_id: String,
    pub source: LabelSource,
    pub removals: Vec<RemovalRecord>,
}

/// Tokens of one conversation marked for cleanup, each with one category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelSetRecord", into = "LabelSetRecord")]
pub struct LabelSet {
    pub conv_id: String,
    pub source: LabelSource,
    pub removals: BTreeMap<TokenId, Category>,
}

impl LabelSet {
    pub fn new(conv_id: impl Into<String>, source: LabelSource) -> Self {
        Self {
            conv_id: conv_id.into(),
            source,
            removals: BTreeMap::new(),
        }
    }

    pub fn with_removals(
        conv_id: impl Into<String>,
        source: LabelSource,
        removals: impl IntoIterator<Item = (TokenId, Category)>,
    ) -> Self {
        Self {
            conv_id: conv_id.into(),
            source,
            removals: removals.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.removals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removals.is_empty()
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.removals.contains_key(&id)
    }

    pub fn get(&self, id: TokenId) -> Option<Category> {
        self.removals.get(&id).copied()
    }

    /// Checks that the set targets `conv` and every labeled token exists there.
    pub fn validate_against(&self, conv: &Conversation) -> Result<(), ModelError> {
        if self.conv_id != conv.conv_id() {
            return Err(ModelError::ConversationMismatch {
                conv_id: self.conv_id.clone(),
                other: conv.conv_id().to_string(),
            });
        }
        match self.removals.keys().find(|id| !conv.contains(**id)) {
            Some(id) => Err(ModelError::DanglingToken {
                conv_id: self.conv_id.clone(),
                turn: id.turn,
                position: id.position,
            }),
            None => Ok(()),
        }
    }

    /// Labels whose token ids satisfy `keep`.
    pub fn restricted(&self, mut keep: impl FnMut(TokenId) -> bool) -> LabelSet {
        LabelSet {
            conv_id: self.conv_id.clone(),
            source: self.source.clone(),
            removals: self
                .removals
                .iter()
                .filter(|(id, _)| keep(**id))
                .map(|(id, c)| (*id, *c))
                .collect(),
        }
    }

    pub fn to_record(&self) -> LabelSetRecord {
        LabelSetRecord {
            conv_id: self.conv_id.clone(),
            source: self.source.clone(),
            removals: self
                .removals
                .iter()
                .map(|(id, category)| RemovalRecord {
                    turn: id.turn,
                    position: id.position,
                    category: *category,
                })
                .collect(),
        }
    }
}

impl TryFrom<LabelSetRecord> for LabelSet {
    type Error = ModelError;

    fn try_from(record: LabelSetRecord) -> Result<Self, Self::Error> {
        let mut removals = BTreeMap::new();
        for r in record.removals {
            if removals
                .insert(TokenId::new(r.turn, r.position), r.category)
                .is_some()
            {
                return Err(ModelError::DuplicateRemoval {
                    conv_id: record.conv_id,
                    turn: r.turn,
                    position: r.position,
                });
            }
        }
        Ok(LabelSet {
            conv_id: record.conv_id,
            source: record.source,
            removals,
        })
    }
}

impl From<LabelSet> for LabelSetRecord {
    fn from(labels: LabelSet) -> Self {
        labels.to_record()
    }
}
