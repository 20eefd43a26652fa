use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::model::{Category, LabelSet, TokenId};

/// Token-level confusion counts for the binary remove/keep decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self { tp, fp, fn_ }
    }

    /// Counts over two aligned per-token label vectors. Shorter input wins;
    /// callers check lengths.
    pub fn from_labels(pred: &[Option<Category>], gold: &[Option<Category>]) -> Self {
        let mut c = Confusion::default();
        for (p, g) in pred.iter().zip(gold) {
            match (p.is_some(), g.is_some()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        c
    }

    /// Precision, recall and F1.
    ///
    /// A zero denominator yields 1 when neither side has positives (nothing to
    /// find, nothing claimed) and 0 otherwise.
    pub fn report(self) -> MetricsReport {
        let Confusion { tp, fp, fn_ } = self;
        let vacuous = tp + fp == 0 && tp + fn_ == 0;
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                if vacuous {
                    1.0
                } else {
                    0.0
                }
            } else {
                num as f64 / den as f64
            }
        };
        MetricsReport {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            tp,
            fp,
            fn_,
        }
    }
}

impl AddAssign for Confusion {
    fn add_assign(&mut self, rhs: Confusion) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MetricsReport {
    pub fn confusion(&self) -> Confusion {
        Confusion::new(self.tp, self.fp, self.fn_)
    }
}

/// Per-token P/R/F1 of `pred` against `gold` over the tokens in `universe`.
/// Labels outside the universe are ignored; categories do not matter.
pub fn token_prf(
    pred: &LabelSet,
    gold: &LabelSet,
    universe: impl IntoIterator<Item = TokenId>,
) -> MetricsReport {
    let mut c = Confusion::default();
    for id in universe {
        match (pred.contains(id), gold.contains(id)) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c.report()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LabelSource;

    fn set(ids: &[(usize, usize)]) -> LabelSet {
        LabelSet::with_removals(
            "c",
            LabelSource::Gold,
            ids.iter()
                .map(|&(t, p)| (TokenId::new(t, p), Category::Others)),
        )
    }

    fn universe(n: usize) -> impl Iterator<Item = TokenId> {
        (0..n).map(|p| TokenId::new(0, p))
    }

    #[test]
    fn perfect_prediction() {
        let gold = set(&[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4)]);
        let r = token_prf(&gold, &gold, universe(8));
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_right() {
        let pred = set(&[(0, 0), (0, 1), (0, 2), (0, 3)]);
        let gold = set(&[(0, 0), (0, 1), (0, 4), (0, 5)]);
        let r = token_prf(&pred, &gold, universe(8));
        assert_eq!((r.tp, r.fp, r.fn_), (2, 2, 2));
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn vacuous_and_one_sided_conventions() {
        let empty = set(&[]);
        let r = token_prf(&empty, &empty, universe(4));
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let gold = set(&[(0, 1)]);
        let r = token_prf(&empty, &gold, universe(4));
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = token_prf(&gold, &empty, universe(4));
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn labels_outside_universe_are_ignored() {
        let pred = set(&[(0, 0), (3, 3)]);
        let gold = set(&[(0, 0)]);
        assert_eq!(token_prf(&pred, &gold, universe(2)).f1, 1.0);
    }

    #[test]
    fn serializes_fn_field() {
        let json = serde_json::to_string(&Confusion::new(1, 2, 3).report()).unwrap();
        assert!(json.contains(r#""fn":3"#), "{json}");
    }
}
