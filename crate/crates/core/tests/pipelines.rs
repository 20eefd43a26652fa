use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use dialclean_core::detectors::{
    build_detector, Detector, DetectorContext, DetectorKind, DetectorSpec, Heuristic, Scope,
};
use dialclean_core::io::read_jsonl;
use dialclean_core::markup::{annotate_disfluencies, MarkupOptions, RawConversation};
use dialclean_core::model::{Conversation, LabelSet, LabelSource, PipelineConfig, TokenId};
use dialclean_core::par::Executor;
use dialclean_core::pipeline::{
    evaluate, evaluate_corpus, redact, run_combined_corpus, run_two_stage_corpus, union_example,
    UnionExample,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn by_id(sets: impl IntoIterator<Item = LabelSet>) -> Arc<BTreeMap<String, LabelSet>> {
    Arc::new(sets.into_iter().map(|s| (s.conv_id.clone(), s)).collect())
}

fn oracle(
    scope: Scope,
    max_seq: usize,
    gold: Arc<BTreeMap<String, LabelSet>>,
) -> Box<dyn Detector> {
    let ctx = DetectorContext {
        gold: Some(gold),
        ..Default::default()
    };
    build_detector(
        &DetectorSpec::new(DetectorKind::Oracle, scope, max_seq),
        &ctx,
    )
    .unwrap()
}

fn union_fixture() -> Vec<UnionExample> {
    let raw: Vec<RawConversation> = read_jsonl(fixture("raw.swb")).unwrap();
    let mtd: Vec<LabelSet> = read_jsonl(fixture("raw.mtd.gold.jsonl")).unwrap();
    raw.iter()
        .zip(&mtd)
        .map(|(r, m)| {
            union_example(
                &annotate_disfluencies(r, MarkupOptions::default()).unwrap(),
                m,
            )
            .unwrap()
        })
        .collect()
}

fn ids(set: &LabelSet) -> Vec<TokenId> {
    set.removals.keys().copied().collect()
}

#[test]
fn redacting_disfluency_gold_recovers_the_preprocessed_transcript() {
    let raw: Vec<RawConversation> = read_jsonl(fixture("raw.swb")).unwrap();
    for r in &raw {
        let ann = annotate_disfluencies(r, MarkupOptions::default()).unwrap();
        let red = redact(&ann.full, &ann.disfluencies).unwrap();
        assert_eq!(red.conversation.to_record(), ann.cleaned.to_record());
        assert_eq!(red.back_map, ann.cleaned_to_full);
    }
}

fn run_both(
    examples: &[UnionExample],
    exec: &Executor,
    mtd_max_seq: usize,
) -> (Vec<LabelSet>, Vec<LabelSet>) {
    let convs: Vec<Conversation> = examples.iter().map(|e| e.conversation.clone()).collect();
    let cfg = PipelineConfig::default();
    let std = oracle(
        Scope::SingleTurn,
        cfg.std_max_seq,
        by_id(examples.iter().map(|e| e.disfluency.clone())),
    );
    let mtd = oracle(
        Scope::MultiTurn,
        mtd_max_seq,
        by_id(examples.iter().map(|e| e.multi_turn.clone())),
    );
    let comb = oracle(
        Scope::MultiTurn,
        mtd_max_seq,
        by_id(examples.iter().map(|e| e.union.clone())),
    );
    let two: Vec<LabelSet> = run_two_stage_corpus(&convs, std.as_ref(), mtd.as_ref(), &cfg, exec)
        .unwrap()
        .into_iter()
        .map(|o| o.union)
        .collect();
    let one = run_combined_corpus(&convs, comb.as_ref(), &cfg, exec).unwrap();
    (two, one)
}

#[test]
fn oracle_pipelines_are_perfect_and_agree() {
    let examples = union_fixture();
    let convs: Vec<Conversation> = examples.iter().map(|e| e.conversation.clone()).collect();
    let golds: BTreeMap<String, LabelSet> = examples
        .iter()
        .map(|e| (e.union.conv_id.clone(), e.union.clone()))
        .collect();
    // A small budget forces several overlapping chunks per conversation.
    for max_seq in [512, 12] {
        for exec in [Executor::sequential(), Executor::new(4)] {
            let (two, one) = run_both(&examples, &exec, max_seq);
            for preds in [&two, &one] {
                let preds: BTreeMap<_, _> = preds
                    .iter()
                    .map(|p| (p.conv_id.clone(), p.clone()))
                    .collect();
                let m = evaluate_corpus(&convs, &preds, &golds).unwrap().metrics;
                assert_eq!(
                    (m.precision, m.recall, m.f1),
                    (1.0, 1.0, 1.0),
                    "max_seq {max_seq}"
                );
            }
            for (a, b) in two.iter().zip(&one) {
                assert_eq!(ids(a), ids(b));
            }
        }
    }
}

#[test]
fn all_negative_detectors_have_zero_recall() {
    let examples = union_fixture();
    let convs: Vec<Conversation> = examples.iter().map(|e| e.conversation.clone()).collect();
    let empty = by_id(
        convs
            .iter()
            .map(|c| LabelSet::new(c.conv_id(), LabelSource::Gold)),
    );
    let cfg = PipelineConfig::default();
    let exec = Executor::sequential();
    let std = oracle(Scope::SingleTurn, 64, empty.clone());
    let mtd = oracle(Scope::MultiTurn, 512, empty);
    let external = build_detector(
        &DetectorSpec::parse(
            r#"external:awk -F'\t' '{ s=""; for (i=1;i<=NF;i++) if ($i!="[SEP]") s = s (s==""?"":" ") "0"; print s; fflush() }'"#,
            Scope::MultiTurn,
            512,
        )
        .unwrap(),
        &DetectorContext::default(),
    )
    .unwrap();
    let two = run_two_stage_corpus(&convs, std.as_ref(), mtd.as_ref(), &cfg, &exec).unwrap();
    let ext = run_combined_corpus(&convs, external.as_ref(), &cfg, &exec).unwrap();
    for ((e, t), x) in examples.iter().zip(&two).zip(&ext) {
        for pred in [&t.union, x] {
            let m = evaluate(pred, &e.union, e.conversation.token_ids()).metrics;
            assert_eq!(m.recall, 0.0);
            assert_eq!(m.tp, 0);
        }
    }
}

#[test]
fn heuristic_bundle_on_instance_fixture() {
    let convs: Vec<Conversation> = read_jsonl(fixture("instance.jsonl")).unwrap();
    let gold: Vec<LabelSet> = read_jsonl(fixture("instance.gold.jsonl")).unwrap();
    let det = build_detector(
        &DetectorSpec::new(
            DetectorKind::Heuristic {
                name: Heuristic::Bundle,
            },
            Scope::MultiTurn,
            512,
        ),
        &DetectorContext::default(),
    )
    .unwrap();
    let pred = run_combined_corpus(
        &convs,
        det.as_ref(),
        &PipelineConfig::default(),
        &Executor::sequential(),
    )
    .unwrap()
    .remove(0);
    let m = evaluate(&pred, &gold[0], convs[0].token_ids()).metrics;
    assert!(m.f1 > 0.0 && m.f1 < 1.0, "f1 {}", m.f1);
    for turn in [2, 4] {
        assert_eq!(convs[0].turns()[turn].slash_units[0][0].text, "Exactly.");
        assert!(pred.contains(TokenId::new(turn, 0)), "turn {turn}");
    }
}
