#[path = "support/markup_gen.rs"]
mod markup_gen;

use dialclean_core::markup::{clean_markup, count_words, parse_markup, render, MarkupOptions};
use markup_gen::{bracket_depth, oracle_clean, random_markup};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn clean(s: &str) -> Vec<String> {
    clean_markup(s, MarkupOptions::default())
        .expect("generated markup parses")
        .tokens
}

#[test]
fn generator_respects_depth_and_reaches_it() {
    let mut rng = StdRng::seed_from_u64(1);
    let mut seen = [0usize; 5];
    for _ in 0..2000 {
        let d = bracket_depth(&random_markup(&mut rng, 4));
        assert!(d <= 4);
        seen[d] += 1;
    }
    assert!(seen.iter().all(|&n| n > 0), "depth histogram {seen:?}");
}

#[test]
fn matches_reference_cleaner_on_seeded_corpus() {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    for i in 0..3000 {
        let s = random_markup(&mut rng, 4);
        assert_eq!(clean(&s), oracle_clean(&s), "case {i}: {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_reference_cleaner(seed in any::<u64>(), depth in 0usize..=4) {
        let s = random_markup(&mut StdRng::seed_from_u64(seed), depth);
        prop_assert_eq!(clean(&s), oracle_clean(&s), "{}", s);
    }

    #[test]
    fn cleaning_is_idempotent(seed in any::<u64>(), depth in 0usize..=4) {
        let once = clean(&random_markup(&mut StdRng::seed_from_u64(seed), depth));
        prop_assert_eq!(clean(&once.join(" ")), once);
    }

    #[test]
    fn words_are_conserved(seed in any::<u64>(), depth in 0usize..=4) {
        let s = random_markup(&mut StdRng::seed_from_u64(seed), depth);
        let nodes = parse_markup(&s).unwrap();
        let out = clean_markup(&s, MarkupOptions::default()).unwrap();
        prop_assert_eq!(count_words(&nodes), out.tokens.len() + out.trace.removed_word_count());
    }

    #[test]
    fn every_raw_byte_is_classified_once(seed in any::<u64>(), depth in 0usize..=4) {
        let s = random_markup(&mut StdRng::seed_from_u64(seed), depth);
        let out = clean_markup(&s, MarkupOptions::default()).unwrap();
        let mut hits = vec![0u8; s.len()];
        let spans = out.trace.kept.iter().chain(out.trace.removed.iter().map(|r| &r.span));
        for span in spans {
            for h in &mut hits[span.clone()] {
                *h += 1;
            }
        }
        for (i, b) in s.bytes().enumerate() {
            if b.is_ascii_whitespace() {
                prop_assert!(hits[i] <= 1, "byte {} of {:?}", i, s);
            } else {
                prop_assert_eq!(hits[i], 1, "byte {} of {:?}", i, s);
            }
        }
        prop_assert_eq!(out.trace.kept.len(), out.tokens.len());
        for (span, tok) in out.trace.kept.iter().zip(&out.tokens) {
            prop_assert_eq!(&s[span.clone()], tok.as_str());
        }
    }

    #[test]
    fn output_has_no_markup_characters(seed in any::<u64>(), depth in 0usize..=4) {
        for tok in clean(&random_markup(&mut StdRng::seed_from_u64(seed), depth)) {
            prop_assert!(!tok.contains(['[', ']', '{', '}', '<', '>']), "{}", tok);
            prop_assert!(!matches!(tok.as_str(), "+" | "#" | "/"), "{}", tok);
        }
    }

    #[test]
    fn render_is_a_fixed_point(seed in any::<u64>(), depth in 0usize..=4) {
        let s = random_markup(&mut StdRng::seed_from_u64(seed), depth);
        let once = render(&parse_markup(&s).unwrap());
        let twice = render(&parse_markup(&once).unwrap());
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(clean(&once), clean(&s));
    }
}
