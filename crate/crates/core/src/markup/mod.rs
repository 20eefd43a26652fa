//! Treebank-3 style disfluency markup.
//!
//! A slash unit such as `[ it's + { uh } it's ] almost /` is parsed into a
//! [`MarkupNode`] tree, non-speech markers are stripped, then reparanda and
//! interregna are removed recursively, leaving the words a labeler sees.
//!
//! Grammar (whitespace separates items):
//!
//! ```text
//! seq         := item*
//! item        := edited | curly | word | marker
//! edited      := '[' seq '+' interregnum* seq ']'
//! interregnum := '{' ('D' | 'E' | 'F')? seq '}'
//! ```
//!
//! Curly groups tagged with another capital letter (`{C and }`, `{A aside }`)
//! are transparent: their words are kept. A curly group whose first character
//! is not whitespace or a kind letter (`{breathing}`) is a noise marker.

mod parser;
mod preprocess;
mod remove;
mod strip;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::parse_markup;
pub use preprocess::{
    annotate_disfluencies, clean_markup, preprocess_conversation, CleanedUnit, ConversationTrace,
    DisfluencyAnnotation, PreprocessError, Preprocessed, RawConversation, RawTurn, UnitTrace,
};
pub use remove::remove_disfluencies;
pub use strip::{strip_markers, strip_markers_traced};

/// Byte range into the raw markup string.
pub type Span = Range<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterregnumKind {
    /// `{D ...}` discourse marker: "you know", "well", "so".
    Discourse,
    /// `{E ...}` explicit editing term: "I mean", "sorry".
    Editing,
    /// `{F ...}` filler: "uh", "um".
    Filler,
    /// Bare `{ ... }` group.
    Unknown,
}

impl InterregnumKind {
    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            b'D' => Some(Self::Discourse),
            b'E' => Some(Self::Editing),
            b'F' => Some(Self::Filler),
            _ => None,
        }
    }

    pub fn tag(self) -> Option<char> {
        match self {
            Self::Discourse => Some('D'),
            Self::Editing => Some('E'),
            Self::Filler => Some('F'),
            Self::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkupNode {
    Word {
        text: String,
        span: Span,
    },
    /// `[ reparandum + {interregnum} repair ]`; `open`, `ip` and `close` are
    /// the spans of `[`, `+` and `]`.
    Edited {
        open: Span,
        reparandum: Vec<MarkupNode>,
        ip: Span,
        interregnum: Vec<MarkupNode>,
        repair: Vec<MarkupNode>,
        close: Span,
    },
    Interregnum {
        kind: InterregnumKind,
        open: Span,
        children: Vec<MarkupNode>,
        close: Span,
    },
    /// Transparent curly group such as `{C and }`.
    Group {
        tag: char,
        open: Span,
        children: Vec<MarkupNode>,
        close: Span,
    },
    /// `<<laughter>>`, `{breathing}`, `(laughter)`.
    NoiseMarker {
        raw: String,
        span: Span,
    },
    /// `<English bike>`, `<Throat_clearing>`.
    AngleMarker {
        raw: String,
        span: Span,
    },
    /// `((yesterday))`.
    DoubleParen {
        open: Span,
        children: Vec<MarkupNode>,
        close: Span,
    },
    /// `+sight-seeing+`.
    PlusMarked {
        text: String,
        span: Span,
    },
    /// `#` or `/`.
    ProsodicSymbol {
        symbol: char,
        span: Span,
    },
    /// Stray transcription punctuation: `%`, `**`, `&`, `/>`, `+>`, `<]>`,
    /// `()`, `((`, `))`, `[[`, `]]` and unmatched parens or angles.
    Punctuation {
        raw: String,
        span: Span,
    },
}

impl MarkupNode {
    /// Character extent of the node in the raw string.
    pub fn span(&self) -> Span {
        match self {
            MarkupNode::Word { span, .. }
            | MarkupNode::NoiseMarker { span, .. }
            | MarkupNode::AngleMarker { span, .. }
            | MarkupNode::PlusMarked { span, .. }
            | MarkupNode::ProsodicSymbol { span, .. }
            | MarkupNode::Punctuation { span, .. } => span.clone(),
            MarkupNode::Edited { open, close, .. }
            | MarkupNode::Interregnum { open, close, .. }
            | MarkupNode::Group { open, close, .. }
            | MarkupNode::DoubleParen { open, close, .. } => open.start..close.end,
        }
    }

    /// Number of `Word` leaves in the subtree.
    pub fn word_count(&self) -> usize {
        match self {
            MarkupNode::Word { .. } => 1,
            MarkupNode::Edited {
                reparandum,
                interregnum,
                repair,
                ..
            } => count_words(reparandum) + count_words(interregnum) + count_words(repair),
            MarkupNode::Interregnum { children, .. }
            | MarkupNode::Group { children, .. }
            | MarkupNode::DoubleParen { children, .. } => count_words(children),
            _ => 0,
        }
    }
}

pub fn count_words(nodes: &[MarkupNode]) -> usize {
    nodes.iter().map(MarkupNode::word_count).sum()
}

/// Canonical markup text for a node sequence; parsing it back yields the same
/// tree shape.
pub fn render(nodes: &[MarkupNode]) -> String {
    let mut out = Vec::new();
    for n in nodes {
        render_node(n, &mut out);
    }
    out.join(" ")
}

fn render_node(node: &MarkupNode, out: &mut Vec<String>) {
    let seq = |nodes: &[MarkupNode], out: &mut Vec<String>| {
        for n in nodes {
            render_node(n, out);
        }
    };
    match node {
        MarkupNode::Word { text, .. } => out.push(text.clone()),
        MarkupNode::Edited {
            reparandum,
            interregnum,
            repair,
            ..
        } => {
            out.push("[".into());
            seq(reparandum, out);
            out.push("+".into());
            seq(interregnum, out);
            seq(repair, out);
            out.push("]".into());
        }
        MarkupNode::Interregnum { kind, children, .. } => {
            out.push(match kind.tag() {
                Some(t) => format!("{{{t}"),
                None => "{".into(),
            });
            seq(children, out);
            out.push("}".into());
        }
        MarkupNode::Group { tag, children, .. } => {
            out.push(format!("{{{tag}"));
            seq(children, out);
            out.push("}".into());
        }
        MarkupNode::DoubleParen { children, .. } => {
            out.push("((".into());
            seq(children, out);
            out.push("))".into());
        }
        MarkupNode::PlusMarked { text, .. } => out.push(format!("+{text}+")),
        MarkupNode::ProsodicSymbol { symbol, .. } => out.push(symbol.to_string()),
        MarkupNode::NoiseMarker { raw, .. }
        | MarkupNode::AngleMarker { raw, .. }
        | MarkupNode::Punctuation { raw, .. } => out.push(raw.clone()),
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unbalanced bracket at byte {0}")]
    UnbalancedBracket(usize),
    #[error("unbalanced brace at byte {0}")]
    UnbalancedBrace(usize),
    #[error("stray interruption point at byte {0}")]
    StrayInterruptionPoint(usize),
    #[error("edited region opened at byte {0} has no interruption point")]
    MissingInterruptionPoint(usize),
    #[error("unbalanced double parenthesis at byte {0}")]
    UnbalancedParen(usize),
    #[error("unterminated marker at byte {0}")]
    UnterminatedMarker(usize),
}

/// Why a piece of raw markup did not reach the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalReason {
    Reparandum,
    Interregnum,
    Noise,
    Prosodic,
    Angle,
    Plus,
    PunctuationSymbol,
    DoubleParenSyntax,
    /// Words inside a removed `((...))` group.
    Uncertain,
    /// `[`, `+`, `]` and the braces of transparent groups.
    MarkupSyntax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedSpan {
    pub span: Span,
    pub reason: RemovalReason,
    /// Set when the removed piece was a spoken word.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
}

/// Provenance of one cleaned slash unit: the raw span of every output token
/// and every removed piece with its reason.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleanupTrace {
    pub kept: Vec<Span>,
    pub removed: Vec<RemovedSpan>,
}

impl CleanupTrace {
    pub fn removed_word_count(&self) -> usize {
        self.removed.iter().filter(|r| r.word.is_some()).count()
    }

    pub(crate) fn merge(&mut self, mut other: CleanupTrace) {
        self.kept.append(&mut other.kept);
        self.removed.append(&mut other.removed);
        self.kept.sort_by_key(|s| s.start);
        self.removed.sort_by_key(|r| r.span.start);
    }
}

/// Options for marker stripping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MarkupOptions {
    /// Keep words inside `((...))`, removing only the parentheses.
    pub keep_uncertain_words: bool,
}
