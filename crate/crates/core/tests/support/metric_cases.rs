//! Hand-computed metric cases and an independent kappa implementation.

use dialclean_core::model::{Category, LabelSet, LabelSource, TokenId};
use rand::rngs::StdRng;
use rand::Rng;

/// Labels realising a confusion count over `tp + fp + fn + tn` tokens.
pub fn sets(tp: usize, fp: usize, fn_: usize, tn: usize) -> (LabelSet, LabelSet, Vec<TokenId>) {
    let mut pred = LabelSet::new("c", LabelSource::Prediction("p".into()));
    let mut gold = LabelSet::new("c", LabelSource::Gold);
    let mut pos = 0;
    let mut next = || {
        pos += 1;
        TokenId::new(0, pos - 1)
    };
    for _ in 0..tp {
        let id = next();
        pred.removals.insert(id, Category::Others);
        gold.removals.insert(id, Category::ThinkAloud);
    }
    for _ in 0..fp {
        pred.removals.insert(next(), Category::Others);
    }
    for _ in 0..fn_ {
        gold.removals.insert(next(), Category::Others);
    }
    for _ in 0..tn {
        next();
    }
    let universe = (0..pos).map(|p| TokenId::new(0, p)).collect();
    (pred, gold, universe)
}

pub type Frac = (usize, usize);

/// Direct evaluation from the definition: per-item agreement counted over
/// ordered rater pairs, chance agreement from the pooled label shares.
#[allow(clippy::needless_range_loop)]
pub fn direct_kappa(ratings: &[Vec<Option<Category>>]) -> f64 {
    let raters = ratings.len();
    let items = ratings[0].len();
    let mut p_bar = 0.0;
    for i in 0..items {
        let mut agree = 0usize;
        for a in 0..raters {
            for b in 0..raters {
                if a != b && ratings[a][i] == ratings[b][i] {
                    agree += 1;
                }
            }
        }
        p_bar += agree as f64 / (raters * (raters - 1)) as f64;
    }
    p_bar /= items as f64;
    let all: Vec<Option<Category>> = ratings.iter().flatten().copied().collect();
    let labels = std::iter::once(None).chain(Category::ALL.into_iter().map(Some));
    let p_e: f64 = labels
        .map(|l| {
            let p = all.iter().filter(|x| **x == l).count() as f64 / all.len() as f64;
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        1.0
    } else {
        (p_bar - p_e) / (1.0 - p_e)
    }
}

pub fn random_matrix(rng: &mut StdRng) -> Vec<Vec<Option<Category>>> {
    let raters = rng.random_range(2..=6);
    let items = rng.random_range(1..=40);
    let kinds = rng.random_range(1..=6);
    let truth: Vec<usize> = (0..items).map(|_| rng.random_range(0..kinds)).collect();
    let noise = rng.random_range(0.0..1.0);
    (0..raters)
        .map(|_| {
            truth
                .iter()
                .map(|&t| {
                    let k = if rng.random_bool(noise) {
                        rng.random_range(0..kinds)
                    } else {
                        t
                    };
                    k.checked_sub(1).map(|c| Category::ALL[c])
                })
                .collect()
        })
        .collect()
}

/// (tp, fp, fn, tn) -> P, R, F1.
pub type PrfCase = ((usize, usize, usize, usize), Frac, Frac, Frac);

/// Exact fractions worked out by hand. An empty denominator scores 1 only
/// when both prediction and gold are empty, otherwise 0.
pub const PRF_CASES: [PrfCase; 20] = [
    ((0, 0, 0, 0), (1, 1), (1, 1), (1, 1)),
    ((0, 0, 0, 9), (1, 1), (1, 1), (1, 1)),
    ((0, 0, 4, 2), (0, 1), (0, 4), (0, 4)),
    ((0, 3, 0, 2), (0, 3), (0, 1), (0, 3)),
    ((0, 2, 5, 1), (0, 2), (0, 5), (0, 7)),
    ((1, 0, 0, 0), (1, 1), (1, 1), (2, 2)),
    ((5, 0, 0, 5), (5, 5), (5, 5), (10, 10)),
    ((1, 1, 0, 0), (1, 2), (1, 1), (2, 3)),
    ((1, 0, 1, 0), (1, 1), (1, 2), (2, 3)),
    ((1, 1, 1, 0), (1, 2), (1, 2), (2, 4)),
    ((3, 1, 2, 4), (3, 4), (3, 5), (6, 9)),
    ((2, 3, 0, 1), (2, 5), (2, 2), (4, 7)),
    ((2, 0, 3, 1), (2, 2), (2, 5), (4, 7)),
    ((4, 4, 4, 4), (4, 8), (4, 8), (8, 16)),
    ((7, 2, 1, 0), (7, 9), (7, 8), (14, 17)),
    ((1, 9, 0, 0), (1, 10), (1, 1), (2, 11)),
    ((1, 0, 9, 0), (1, 1), (1, 10), (2, 11)),
    ((10, 5, 5, 80), (10, 15), (10, 15), (20, 30)),
    ((6, 1, 3, 2), (6, 7), (6, 9), (12, 16)),
    ((24, 7, 11, 300), (24, 31), (24, 35), (48, 66)),
];
