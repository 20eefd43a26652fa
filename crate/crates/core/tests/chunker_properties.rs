#[path = "support/convgen.rs"]
mod convgen;

use convgen::{random_conversation, random_labels};
use dialclean_core::chunker::{
    chunk_conversation, chunk_for_inference, reassemble, to_label_set, Hit,
};
use dialclean_core::model::{
    Category, ChunkAlignment, Conversation, LabelSource, PipelineConfig, Split, TurnRecord,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn turn_offsets(conv: &Conversation) -> Vec<usize> {
    (0..=conv.turns().len())
        .map(|t| conv.turn_offset(t))
        .collect()
}

fn check_tiling(conv: &Conversation, hits: &[Hit]) -> Result<(), TestCaseError> {
    prop_assert_eq!(hits[0].token_start, 0);
    prop_assert_eq!(hits.last().unwrap().token_end, conv.token_count());
    for (k, pair) in hits.windows(2).enumerate() {
        prop_assert!(
            pair[1].token_start > pair[0].token_start,
            "chunk {} does not advance",
            k + 1
        );
        prop_assert!(
            pair[1].token_start <= pair[0].token_end,
            "gap before chunk {}",
            k + 1
        );
        prop_assert_eq!(
            pair[0].overlap_right,
            [pair[1].token_start, pair[0].token_end]
        );
        prop_assert_eq!(pair[1].overlap_left, pair[0].overlap_right);
    }
    for (k, h) in hits.iter().enumerate() {
        prop_assert_eq!(h.chunk_index, k);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn annotation_chunks(seed in any::<u64>(), tokens in 10usize..=5000, max_turn in 1usize..=80) {
        let mut rng = StdRng::seed_from_u64(seed);
        let conv = random_conversation(&mut rng, "c", tokens, max_turn);
        let cfg = PipelineConfig::default();
        let hits = chunk_conversation(&conv, &cfg).unwrap();
        let target = cfg.chunk_target_tokens;
        let offsets = turn_offsets(&conv);
        check_tiling(&conv, &hits)?;

        for (k, h) in hits.iter().enumerate() {
            prop_assert!(offsets.contains(&h.token_start) && offsets.contains(&h.token_end));
            let last_turn = conv.turn_offset(h.turn_end) - conv.turn_offset(h.turn_end - 1);
            let is_last = k + 1 == hits.len();
            // Smallest aligned span reaching the target.
            prop_assert!(is_last || h.len() >= target);
            prop_assert!(h.len() - last_turn < target);
            for t in h.turn_start..h.turn_end {
                prop_assert!(h.covers_turn(&conv, t));
            }
        }

        // The next start is the turn boundary inside the chunk nearest to the
        // ideal stride, so it is within one turn of half-chunk overlap.
        let stride = target as f64 * (1.0 - cfg.chunk_overlap_fraction);
        for pair in hits.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ideal = a.token_start as f64 + stride;
            let dist = |x: usize| (x as f64 - ideal).abs();
            let nearest = offsets
                .iter()
                .copied()
                .filter(|&o| o > a.token_start && o <= a.token_end)
                .map(dist)
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(dist(b.token_start), nearest);
            let around = offsets.iter().filter(|&&o| {
                let lo = ideal.min(b.token_start as f64);
                let hi = ideal.max(b.token_start as f64);
                (o as f64) > lo && (o as f64) < hi
            });
            prop_assert_eq!(around.count(), 0);
        }

        let gold = random_labels(&mut rng, &conv, 0.15);
        let per_chunk: Vec<_> = hits.iter().map(|h| h.labels_from(&conv, &gold)).collect();
        let merged = reassemble(&conv, &hits, &per_chunk).unwrap();
        prop_assert_eq!(to_label_set(&conv, &merged, LabelSource::Gold), gold);
    }

    #[test]
    fn inference_chunks_fit_the_budget(seed in any::<u64>(), tokens in 10usize..=3000, max_seq in 16usize..=512) {
        let mut rng = StdRng::seed_from_u64(seed);
        let conv = random_conversation(&mut rng, "c", tokens, 60);
        for alignment in [ChunkAlignment::Turn, ChunkAlignment::Token] {
            let hits = chunk_for_inference(&conv, max_seq, 0.5, alignment).unwrap();
            check_tiling(&conv, &hits)?;
            for h in &hits {
                let seps = h.turn_end - h.turn_start - 1;
                prop_assert!(h.len() + seps <= max_seq, "{} + {} > {}", h.len(), seps, max_seq);
            }
            let gold = random_labels(&mut rng, &conv, 0.2);
            let per_chunk: Vec<_> = hits.iter().map(|h| h.labels_from(&conv, &gold)).collect();
            let merged = reassemble(&conv, &hits, &per_chunk).unwrap();
            prop_assert_eq!(to_label_set(&conv, &merged, LabelSource::Gold), gold);
        }
    }
}

#[test]
fn or_merge_truth_table() {
    let conv = Conversation::new(
        "c",
        Split::Unsplit,
        vec![
            TurnRecord {
                speaker: "A".into(),
                slash_units: vec![vec!["x".into()]],
            },
            TurnRecord {
                speaker: "B".into(),
                slash_units: vec![vec!["y".into()]],
            },
        ],
    )
    .unwrap();
    let hits = chunk_for_inference(&conv, 1, 0.5, ChunkAlignment::Token).unwrap();
    assert_eq!(hits.len(), 2);
    // Widen both chunks to share token 0 and token 1.
    let both: Vec<Hit> = hits
        .into_iter()
        .map(|mut h| {
            h.token_start = 0;
            h.token_end = 2;
            h
        })
        .collect();
    let v = |b: bool| b.then_some(Category::Others);
    for a in [false, true] {
        for b in [false, true] {
            let merged = reassemble(&conv, &both, &[vec![v(a), v(a)], vec![v(b), v(b)]]).unwrap();
            assert_eq!(merged, vec![v(a || b); 2], "{a} or {b}");
        }
    }
    let merged = reassemble(
        &conv,
        &both,
        &[
            vec![Some(Category::ThinkAloud), None],
            vec![Some(Category::Others), Some(Category::Others)],
        ],
    )
    .unwrap();
    assert_eq!(
        merged,
        vec![Some(Category::ThinkAloud), Some(Category::Others)]
    );
}
