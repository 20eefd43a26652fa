use std::path::PathBuf;

use dialclean_core::io::{read_jsonl, to_jsonl_string};
use dialclean_core::markup::{
    clean_markup, preprocess_conversation, MarkupOptions, RawConversation,
};
use dialclean_core::model::{
    Category, Conversation, LabelSet, LabelSource, Split, TokenId, TurnRecord,
};
use dialclean_core::pipeline::{redact, render_clean};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn clean(s: &str) -> String {
    clean_markup(s, MarkupOptions::default())
        .unwrap()
        .tokens
        .join(" ")
}

#[test]
fn preprocessing_matches_golden_bytes() {
    let raw: Vec<RawConversation> = read_jsonl(fixture("raw.swb")).unwrap();
    let cleaned: Vec<Conversation> = raw
        .iter()
        .map(|r| {
            preprocess_conversation(r, MarkupOptions::default())
                .unwrap()
                .conversation
        })
        .collect();
    let want = std::fs::read_to_string(fixture("clean.expected.jsonl")).unwrap();
    assert_eq!(to_jsonl_string(&cleaned), want);
}

#[test]
fn bracket_examples_verbatim() {
    assert_eq!(clean("[ it's + { uh } it's ] almost"), "it's almost");
    assert_eq!(clean("[ I just + I ] enjoy working"), "I enjoy working");
    assert_eq!(
        clean("[ was it, + { I mean, } did you ] put"),
        "did you put"
    );
    assert_eq!(clean("[ By + ] it was attached"), "it was attached");
    assert_eq!(clean("[ [ a + b ] + c ] d"), "c d");
    assert_eq!(clean("hello there"), "hello there");
    assert_eq!(clean(""), "");
}

#[test]
fn fixture_drops_empty_units_and_turns() {
    let raw: Vec<RawConversation> = read_jsonl(fixture("raw.swb")).unwrap();
    let out = preprocess_conversation(&raw[0], MarkupOptions::default()).unwrap();
    assert_eq!(raw[0].turns.len(), 6);
    assert_eq!(out.conversation.turns().len(), 5);
    let dropped: Vec<_> = out
        .trace
        .units
        .iter()
        .filter(|u| u.output_turn.is_none())
        .collect();
    assert_eq!(dropped.len(), 1);
    assert_eq!(dropped[0].raw, "{F uh } /");
}

#[test]
fn keeping_uncertain_words_is_opt_in() {
    let opts = MarkupOptions {
        keep_uncertain_words: true,
    };
    let out = clean_markup("the ((yesterday)) great", opts).unwrap();
    assert_eq!(out.tokens, ["the", "yesterday", "great"]);
}

/// Self-repair with a filled pause and an editing phrase; redacting the
/// reparandum and interregnum words leaves the fluent sentence.
#[test]
fn self_repair_redaction() {
    let text = "When I was in uh in high school, I had a lot more I mean I had a lot more good teachers than I did in grade school";
    let conv = Conversation::new(
        "fig",
        Split::Unsplit,
        vec![TurnRecord {
            speaker: "A".into(),
            slash_units: vec![text.split(' ').map(String::from).collect()],
        }],
    )
    .unwrap();
    let labels = LabelSet::with_removals(
        "fig",
        LabelSource::Gold,
        [3, 4, 8, 9, 10, 11, 12, 13, 14].map(|p| (TokenId::new(0, p), Category::Others)),
    );
    let r = redact(&conv, &labels).unwrap();
    assert_eq!(
        render_clean(&r.conversation, &LabelSet::new("fig", LabelSource::Gold)),
        "A: When I was in high school, I had a lot more good teachers than I did in grade school\n"
    );
    assert_eq!(r.back_map[3], TokenId::new(0, 5));
    assert_eq!(r.back_map.len(), conv.token_count() - labels.len());
}
