use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Detector, DetectorError, DetectorInput, DetectorSpec, Labels};
use crate::model::Category;

/// The acknowledgment lexicon shipped with the crate.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/acknowledgments.txt");

/// Minimum repeated n-gram length for the repetition heuristic.
const MIN_REPEAT: usize = 3;
/// Largest turn distance between the two occurrences of a repetition.
const REPEAT_WINDOW: usize = 2;

const FILLERS: &[&str] = &["uh", "um", "er", "ah", "eh", "uhm", "hm", "hmm", "mm"];

/// Lowercases a token and strips punctuation, keeping inner hyphens and
/// apostrophes ("Uh-huh," → "uh-huh").
pub fn normalize(token: &str) -> String {
    let kept: String = token
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '-' || *c == '\'')
        .flat_map(char::to_lowercase)
        .collect();
    kept.trim_matches(|c| c == '-' || c == '\'').to_string()
}

/// Normalized acknowledgment phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(DEFAULT_LEXICON)
    }
}

impl Lexicon {
    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| phrase_key(l.split_whitespace()))
            .filter(|k| !k.is_empty())
            .collect();
        Lexicon { entries }
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        std::fs::read_to_string(path)
            .map(|t| Lexicon::parse(&t))
            .map_err(|e| DetectorError::Lexicon {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when the tokens, normalized, spell exactly one entry.
    pub fn matches<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> bool {
        let key = phrase_key(tokens);
        !key.is_empty() && self.entries.contains(&key)
    }
}

fn phrase_key<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    tokens
        .into_iter()
        .map(normalize)
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// A lone acknowledgment turn sandwiched by the other speaker.
    Acknowledgment,
    /// The earlier copy of an n-gram the same speaker repeats shortly after.
    Repetition,
    /// Fillers and immediately repeated words inside a unit.
    Stutter,
    /// Acknowledgment and repetition together.
    Bundle,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [
        Heuristic::Acknowledgment,
        Heuristic::Repetition,
        Heuristic::Stutter,
        Heuristic::Bundle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Acknowledgment => "acknowledgment",
            Heuristic::Repetition => "repetition",
            Heuristic::Stutter => "stutter",
            Heuristic::Bundle => "bundle",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heuristic {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| DetectorError::UnknownHeuristic(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct HeuristicDetector {
    spec: DetectorSpec,
    heuristic: Heuristic,
    lexicon: Arc<Lexicon>,
}

impl HeuristicDetector {
    pub fn new(spec: DetectorSpec, heuristic: Heuristic, lexicon: Arc<Lexicon>) -> Self {
        Self {
            spec,
            heuristic,
            lexicon,
        }
    }
}

impl Detector for HeuristicDetector {
    fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    fn detect(&self, input: &DetectorInput) -> Result<Labels, DetectorError> {
        input.check_cost(self.spec.max_seq)?;
        let mut labels = vec![None; input.len()];
        match self.heuristic {
            Heuristic::Acknowledgment => acknowledgment(input, &self.lexicon, &mut labels),
            Heuristic::Repetition => repetition(input, &mut labels),
            Heuristic::Stutter => stutter(input, &mut labels),
            Heuristic::Bundle => {
                acknowledgment(input, &self.lexicon, &mut labels);
                repetition(input, &mut labels);
            }
        }
        Ok(labels)
    }
}

fn mark(labels: &mut [Option<Category>], range: std::ops::Range<usize>, category: Category) {
    for l in &mut labels[range] {
        l.get_or_insert(category);
    }
}

fn acknowledgment(input: &DetectorInput, lexicon: &Lexicon, labels: &mut [Option<Category>]) {
    for w in input.segments.windows(3) {
        let [prev, seg, next] = w else { unreachable!() };
        if seg.partial || prev.speaker != next.speaker || prev.speaker == seg.speaker {
            continue;
        }
        if lexicon.matches(input.tokens[seg.start..seg.end].iter().map(String::as_str)) {
            mark(
                labels,
                seg.start..seg.end,
                Category::AcknowledgmentConfirmation,
            );
        }
    }
}

fn repetition(input: &DetectorInput, labels: &mut [Option<Category>]) {
    let norm: Vec<String> = input.tokens.iter().map(|t| normalize(t)).collect();
    let mut seg_of = vec![0; input.len()];
    for (k, s) in input.segments.iter().enumerate() {
        seg_of[s.start..s.end].fill(k);
    }
    let n = input.len();
    for p in 0..n {
        let a = seg_of[p];
        for q in p + 1..n {
            let b = seg_of[q];
            if b - a > REPEAT_WINDOW {
                break;
            }
            if input.segments[a].speaker != input.segments[b].speaker {
                continue;
            }
            let run = (0..)
                .take_while(|&i| {
                    q + i < n
                        && (a != b || p + i < q)
                        && seg_of[p + i] == a
                        && seg_of[q + i] == b
                        && !norm[p + i].is_empty()
                        && norm[p + i] == norm[q + i]
                })
                .count();
            if run >= MIN_REPEAT {
                mark(labels, p..p + run, Category::RepetitionParaphrase);
            }
        }
    }
}

fn stutter(input: &DetectorInput, labels: &mut [Option<Category>]) {
    let norm: Vec<String> = input.tokens.iter().map(|t| normalize(t)).collect();
    for seg in &input.segments {
        for i in seg.start..seg.end {
            let filler = FILLERS.contains(&norm[i].as_str());
            let doubled = i + 1 < seg.end && !norm[i].is_empty() && norm[i] == norm[i + 1];
            if filler || doubled {
                labels[i].get_or_insert(Category::Others);
            }
        }
    }
}
