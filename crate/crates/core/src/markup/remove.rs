use super::strip::drop_all;
use super::{CleanupTrace, MarkupNode, RemovalReason, RemovedSpan};

/// Deletes every reparandum and every interregnum, recursing into nested
/// edited regions; repairs and plain words are kept in source order.
///
/// Nodes that should have been stripped beforehand are removed with their
/// marker reason, so the function is total.
pub fn remove_disfluencies(nodes: &[MarkupNode]) -> (Vec<String>, CleanupTrace) {
    let mut words = Vec::new();
    let mut trace = CleanupTrace::default();
    keep_seq(nodes, &mut words, &mut trace);
    trace.removed.sort_by_key(|r| r.span.start);
    (words, trace)
}

fn keep_seq(nodes: &[MarkupNode], words: &mut Vec<String>, trace: &mut CleanupTrace) {
    for node in nodes {
        let mut syntax = |span: &super::Span| {
            trace.removed.push(RemovedSpan {
                span: span.clone(),
                reason: RemovalReason::MarkupSyntax,
                word: None,
            })
        };
        match node {
            MarkupNode::Word { text, span } => {
                words.push(text.clone());
                trace.kept.push(span.clone());
            }
            MarkupNode::Edited {
                open,
                reparandum,
                ip,
                interregnum,
                repair,
                close,
            } => {
                syntax(open);
                syntax(ip);
                syntax(close);
                drop_all(reparandum, RemovalReason::Reparandum, &mut trace.removed);
                drop_all(interregnum, RemovalReason::Interregnum, &mut trace.removed);
                keep_seq(repair, words, trace);
            }
            MarkupNode::Interregnum { .. } => {
                drop_all(
                    std::slice::from_ref(node),
                    RemovalReason::Interregnum,
                    &mut trace.removed,
                );
            }
            MarkupNode::Group {
                open,
                children,
                close,
                ..
            } => {
                syntax(open);
                syntax(close);
                keep_seq(children, words, trace);
            }
            MarkupNode::DoubleParen {
                open,
                children,
                close,
            } => {
                for s in [open, close] {
                    trace.removed.push(RemovedSpan {
                        span: s.clone(),
                        reason: RemovalReason::DoubleParenSyntax,
                        word: None,
                    });
                }
                keep_seq(children, words, trace);
            }
            other => {
                let reason = match other {
                    MarkupNode::NoiseMarker { .. } => RemovalReason::Noise,
                    MarkupNode::AngleMarker { .. } => RemovalReason::Angle,
                    MarkupNode::PlusMarked { .. } => RemovalReason::Plus,
                    MarkupNode::ProsodicSymbol { .. } => RemovalReason::Prosodic,
                    _ => RemovalReason::PunctuationSymbol,
                };
                trace.removed.push(RemovedSpan {
                    span: other.span(),
                    reason,
                    word: None,
                });
            }
        }
    }
}
