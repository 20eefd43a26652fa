//! Random Treebank-style markup and a string-rewriting reference cleaner that
//! shares no code with the parser.

use rand::rngs::StdRng;
use rand::Rng;

const WORDS: &[&str] = &[
    "i", "it's", "was", "we", "you", "the", "a", "went", "there,", "know", "so", "just", "mean,",
    "uh,", "AT&T", "don't", "well", "that", "more.", "o'clock",
];
const MARKERS: &[&str] = &[
    "#",
    "/",
    "<<laughter>>",
    "{breathing}",
    "<English bike>",
    "(laughter)",
];

fn word(rng: &mut StdRng) -> &'static str {
    WORDS[rng.random_range(0..WORDS.len())]
}

fn words(rng: &mut StdRng, min: usize, max: usize, out: &mut Vec<String>) {
    for _ in 0..rng.random_range(min..=max) {
        out.push(word(rng).to_string());
    }
}

fn curly(rng: &mut StdRng, out: &mut Vec<String>) {
    let open = ["{D", "{E", "{F", "{", "{C"][rng.random_range(0..5)];
    out.push(open.to_string());
    words(rng, 1, 2, out);
    out.push("}".to_string());
}

fn seq(rng: &mut StdRng, depth: usize, min: usize, out: &mut Vec<String>) {
    let n = rng.random_range(min..=3);
    for _ in 0..n {
        match rng.random_range(0..10) {
            0..=4 => out.push(word(rng).to_string()),
            5 | 6 if depth > 0 => edited(rng, depth - 1, out),
            7 => curly(rng, out),
            8 => out.push(MARKERS[rng.random_range(0..MARKERS.len())].to_string()),
            _ => words(rng, 1, 2, out),
        }
    }
}

fn edited(rng: &mut StdRng, depth: usize, out: &mut Vec<String>) {
    out.push("[".to_string());
    seq(rng, depth, 1, out);
    out.push("+".to_string());
    for _ in 0..rng.random_range(0..=2) {
        curly(rng, out);
    }
    seq(rng, depth, 0, out);
    out.push("]".to_string());
}

/// One slash unit with at most `max_depth` levels of nested edited regions.
pub fn random_markup(rng: &mut StdRng, max_depth: usize) -> String {
    let mut out = Vec::new();
    if max_depth > 0 && rng.random_bool(0.7) {
        // Force a region at full depth so deep nesting is actually exercised.
        let mut inner = Vec::new();
        edited(rng, max_depth - 1, &mut inner);
        seq(rng, max_depth, 0, &mut out);
        out.extend(inner);
    }
    seq(rng, max_depth, 0, &mut out);
    out.join(" ")
}

/// Maximum bracket nesting depth of a markup string.
pub fn bracket_depth(s: &str) -> usize {
    let mut depth = 0usize;
    let mut max = 0;
    for c in s.chars() {
        match c {
            '[' => {
                depth += 1;
                max = max.max(depth);
            }
            ']' => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    max
}

/// Reference cleaner: drops curly groups (keeping `{C ..}` contents), then
/// rewrites the innermost `[ x + y ]` to `y` until no bracket is left, then
/// drops marker tokens.
pub fn oracle_clean(s: &str) -> Vec<String> {
    let mut text = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('{') {
        text.push_str(&rest[..i]);
        let close = rest[i..].find('}').expect("balanced braces") + i;
        let body = &rest[i + 1..close];
        if let Some(kept) = body.strip_prefix("C ") {
            text.push(' ');
            text.push_str(kept);
            text.push(' ');
        } else {
            text.push(' ');
        }
        rest = &rest[close + 1..];
    }
    text.push_str(rest);

    while let Some(close) = text.find(']') {
        let open = text[..close].rfind('[').expect("balanced brackets");
        let inner = &text[open + 1..close];
        let (_, repair) = inner.split_once('+').expect("interruption point");
        let replaced = format!("{} {} {}", &text[..open], repair, &text[close + 1..]);
        text = replaced;
    }

    let mut tokens = Vec::new();
    let mut pieces = text.split_whitespace().peekable();
    while let Some(tok) = pieces.next() {
        match tok {
            "#" | "/" | "<<laughter>>" | "(laughter)" => {}
            "<English" => {
                pieces.next();
            }
            _ => tokens.push(tok.to_string()),
        }
    }
    tokens
}
