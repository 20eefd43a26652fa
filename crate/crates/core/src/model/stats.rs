use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::{Category, Conversation, LabelSet, ModelError, Split};

/// Additive corpus counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub conversations: usize,
    pub turns: usize,
    pub tokens: usize,
    pub cleanup_tokens: usize,
    pub hits: usize,
    pub categories: BTreeMap<Category, usize>,
}

impl Default for Counts {
    fn default() -> Self {
        Self {
            conversations: 0,
            turns: 0,
            tokens: 0,
            cleanup_tokens: 0,
            hits: 0,
            categories: Category::ALL.into_iter().map(|c| (c, 0)).collect(),
        }
    }
}

impl Counts {
    /// Share of cleanup tokens per category, in percent. All zero when there
    /// are no cleanup tokens.
    pub fn category_percentages(&self) -> BTreeMap<Category, f64> {
        self.categories
            .iter()
            .map(|(c, n)| {
                let pct = if self.cleanup_tokens == 0 {
                    0.0
                } else {
                    100.0 * *n as f64 / self.cleanup_tokens as f64
                };
                (*c, pct)
            })
            .collect()
    }
}

impl AddAssign<&Counts> for Counts {
    fn add_assign(&mut self, rhs: &Counts) {
        self.conversations += rhs.conversations;
        self.turns += rhs.turns;
        self.tokens += rhs.tokens;
        self.cleanup_tokens += rhs.cleanup_tokens;
        self.hits += rhs.hits;
        for (c, n) in &rhs.categories {
            *self.categories.entry(*c).or_insert(0) += n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: Counts,
    pub by_split: BTreeMap<Split, Counts>,
}

impl StatsReport {
    fn add_conversation(&mut self, conv: &Conversation, labels: Option<&LabelSet>) {
        let mut counts = Counts {
            conversations: 1,
            turns: conv.turns().len(),
            tokens: conv.token_count(),
            ..Default::default()
        };
        if let Some(labels) = labels {
            counts.cleanup_tokens = labels.len();
            for c in labels.removals.values() {
                *counts.categories.entry(*c).or_insert(0) += 1;
            }
        }
        self.total += &counts;
        *self.by_split.entry(conv.split()).or_default() += &counts;
    }

    /// Adds HIT counts, attributing each HIT to its conversation's split.
    pub fn add_hits<'a>(
        &mut self,
        convs: &[Conversation],
        hit_conv_ids: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), ModelError> {
        let splits: HashMap<&str, Split> = convs.iter().map(|c| (c.conv_id(), c.split())).collect();
        for conv_id in hit_conv_ids {
            let split = *splits
                .get(conv_id)
                .ok_or_else(|| ModelError::MissingConversation(conv_id.to_string()))?;
            self.total.hits += 1;
            self.by_split.entry(split).or_default().hits += 1;
        }
        Ok(())
    }
}

impl Add for StatsReport {
    type Output = StatsReport;

    fn add(mut self, rhs: StatsReport) -> StatsReport {
        self.total += &rhs.total;
        for (split, counts) in &rhs.by_split {
            *self.by_split.entry(*split).or_default() += counts;
        }
        self
    }
}

/// Corpus statistics: conversation, turn, token and cleanup counts with the
/// per-category breakdown, overall and per split.
///
/// Every label set must reference a conversation in `convs`, and at most one
/// label set per conversation is accepted.
pub fn dataset_stats(
    convs: &[Conversation],
    labels: &[LabelSet],
) -> Result<StatsReport, ModelError> {
    let mut by_id: HashMap<&str, &Conversation> = HashMap::with_capacity(convs.len());
    for conv in convs {
        if by_id.insert(conv.conv_id(), conv).is_some() {
            return Err(ModelError::DuplicateConversation(
                conv.conv_id().to_string(),
            ));
        }
    }
    let mut label_by_id: HashMap<&str, &LabelSet> = HashMap::with_capacity(labels.len());
    for set in labels {
        let conv = by_id
            .get(set.conv_id.as_str())
            .ok_or_else(|| ModelError::MissingConversation(set.conv_id.clone()))?;
        set.validate_against(conv)?;
        if label_by_id.insert(set.conv_id.as_str(), set).is_some() {
            return Err(ModelError::DuplicateLabelSet(set.conv_id.clone()));
        }
    }
    let mut report = StatsReport::default();
    for conv in convs {
        report.add_conversation(conv, label_by_id.get(conv.conv_id()).copied());
    }
    Ok(report)
}
