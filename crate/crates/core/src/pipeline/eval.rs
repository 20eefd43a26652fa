use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Category, Conversation, LabelSet, ModelError, TokenId};
use crate::quality::{token_prf, Confusion, MetricsReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecall {
    /// Gold tokens of this category.
    pub gold: usize,
    /// Of those, tokens the prediction removes (under any category).
    pub found: usize,
    pub recall: f64,
}

impl CategoryRecall {
    fn finish(mut self) -> Self {
        self.recall = if self.gold == 0 {
            0.0
        } else {
            self.found as f64 / self.gold as f64
        };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: MetricsReport,
    /// Recall per gold category, for categories present in gold.
    pub per_category: BTreeMap<Category, CategoryRecall>,
}

fn category_counts(
    pred: &LabelSet,
    gold: &LabelSet,
    universe: &[TokenId],
    into: &mut BTreeMap<Category, CategoryRecall>,
) {
    for &id in universe {
        if let Some(cat) = gold.get(id) {
            let e = into.entry(cat).or_default();
            e.gold += 1;
            if pred.contains(id) {
                e.found += 1;
            }
        }
    }
}

/// Token P/R/F1 over `universe` plus recall per gold category.
pub fn evaluate(
    pred: &LabelSet,
    gold: &LabelSet,
    universe: impl IntoIterator<Item = TokenId>,
) -> Evaluation {
    let universe: Vec<TokenId> = universe.into_iter().collect();
    let metrics = token_prf(pred, gold, universe.iter().copied());
    let mut per_category = BTreeMap::new();
    category_counts(pred, gold, &universe, &mut per_category);
    Evaluation {
        metrics,
        per_category: per_category
            .into_iter()
            .map(|(c, r)| (c, r.finish()))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationScore {
    pub conv_id: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEvaluation {
    /// Micro-averaged over all tokens of all conversations.
    pub metrics: MetricsReport,
    pub per_category: BTreeMap<Category, CategoryRecall>,
    pub conversations: Vec<ConversationScore>,
}

/// Scores each prediction against the gold set of its conversation, with
/// every token of the conversation as the universe.
pub fn evaluate_corpus(
    convs: &[Conversation],
    preds: &BTreeMap<String, LabelSet>,
    golds: &BTreeMap<String, LabelSet>,
) -> Result<CorpusEvaluation, ModelError> {
    let mut total = Confusion::default();
    let mut per_category = BTreeMap::new();
    let mut conversations = Vec::with_capacity(convs.len());
    for conv in convs {
        let id = conv.conv_id();
        let pred = preds
            .get(id)
            .ok_or_else(|| ModelError::MissingConversation(id.to_string()))?;
        let gold = golds
            .get(id)
            .ok_or_else(|| ModelError::MissingConversation(id.to_string()))?;
        pred.validate_against(conv)?;
        gold.validate_against(conv)?;
        let universe: Vec<TokenId> = conv.token_ids().collect();
        let metrics = token_prf(pred, gold, universe.iter().copied());
        total += metrics.confusion();
        category_counts(pred, gold, &universe, &mut per_category);
        conversations.push(ConversationScore {
            conv_id: id.to_string(),
            metrics,
        });
    }
    Ok(CorpusEvaluation {
        metrics: total.report(),
        per_category: per_category
            .into_iter()
            .map(|(c, r)| (c, r.finish()))
            .collect(),
        conversations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabelSource, Split, TurnRecord};

    fn set(conv: &str, ids: &[(usize, Category)]) -> LabelSet {
        LabelSet::with_removals(
            conv,
            LabelSource::Gold,
            ids.iter().map(|&(p, c)| (TokenId::new(0, p), c)),
        )
    }

    fn conv(id: &str, n: usize) -> Conversation {
        Conversation::new(
            id,
            Split::Unsplit,
            vec![TurnRecord {
                speaker: "A".into(),
                slash_units: vec![(0..n).map(|i| format!("w{i}")).collect()],
            }],
        )
        .unwrap()
    }

    #[test]
    fn per_category_recall() {
        use Category::*;
        let gold = set("c", &[(0, ThinkAloud), (1, ThinkAloud), (2, Others)]);
        let pred = set("c", &[(1, Others), (2, Others), (3, Others)]);
        let e = evaluate(&pred, &gold, conv("c", 4).token_ids());
        assert_eq!((e.metrics.tp, e.metrics.fp, e.metrics.fn_), (2, 1, 1));
        assert_eq!(e.per_category[&ThinkAloud].recall, 0.5);
        assert_eq!(e.per_category[&Others].recall, 1.0);
        assert!(!e.per_category.contains_key(&RepetitionParaphrase));
    }

    #[test]
    fn all_negative_predictor() {
        let gold = set("c", &[(0, Category::Others), (1, Category::Others)]);
        let e = evaluate(&set("c", &[]), &gold, conv("c", 3).token_ids());
        assert_eq!((e.metrics.precision, e.metrics.recall), (0.0, 0.0));
    }

    #[test]
    fn corpus_is_micro_averaged() {
        let convs = [conv("a", 4), conv("b", 4)];
        let golds = BTreeMap::from([
            ("a".to_string(), set("a", &[(0, Category::Others)])),
            (
                "b".to_string(),
                set(
                    "b",
                    &[
                        (0, Category::Others),
                        (1, Category::Others),
                        (2, Category::Others),
                    ],
                ),
            ),
        ]);
        let preds = BTreeMap::from([
            ("a".to_string(), set("a", &[(0, Category::Others)])),
            ("b".to_string(), set("b", &[(3, Category::Others)])),
        ]);
        let e = evaluate_corpus(&convs, &preds, &golds).unwrap();
        assert_eq!((e.metrics.tp, e.metrics.fp, e.metrics.fn_), (1, 1, 3));
        assert_eq!(e.conversations[0].metrics.f1, 1.0);
        assert_eq!(e.conversations[1].metrics.f1, 0.0);
    }

    #[test]
    fn corpus_requires_labels_for_every_conversation() {
        let convs = [conv("a", 1)];
        let golds = BTreeMap::from([("a".to_string(), set("a", &[]))]);
        assert!(matches!(
            evaluate_corpus(&convs, &BTreeMap::new(), &golds),
            Err(ModelError::MissingConversation(_))
        ));
    }
}
