use super::{MarkupNode, MarkupOptions, RemovalReason, RemovedSpan};

/// Removes non-speech markers: noise and context markers, angle-bracket
/// markup, plus-marked words, prosodic symbols, stray punctuation and
/// `((...))` uncertainty groups (or just their parentheses when
/// `keep_uncertain_words` is set). Disfluency structure is left in place.
pub fn strip_markers(nodes: Vec<MarkupNode>, opts: MarkupOptions) -> Vec<MarkupNode> {
    strip_markers_traced(nodes, opts).0
}

/// [`strip_markers`] that also reports what was removed.
pub fn strip_markers_traced(
    nodes: Vec<MarkupNode>,
    opts: MarkupOptions,
) -> (Vec<MarkupNode>, Vec<RemovedSpan>) {
    let mut removed = Vec::new();
    let kept = strip_seq(nodes, opts, &mut removed);
    removed.sort_by_key(|r| r.span.start);
    (kept, removed)
}

fn strip_seq(
    nodes: Vec<MarkupNode>,
    opts: MarkupOptions,
    removed: &mut Vec<RemovedSpan>,
) -> Vec<MarkupNode> {
    let mut out = Vec::with_capacity(nodes.len());
    for node in nodes {
        strip_node(node, opts, removed, &mut out);
    }
    out
}

fn strip_node(
    node: MarkupNode,
    opts: MarkupOptions,
    removed: &mut Vec<RemovedSpan>,
    out: &mut Vec<MarkupNode>,
) {
    let mut drop_as = |span, reason| {
        removed.push(RemovedSpan {
            span,
            reason,
            word: None,
        })
    };
    match node {
        MarkupNode::Word { .. } => out.push(node),
        MarkupNode::NoiseMarker { span, .. } => drop_as(span, RemovalReason::Noise),
        MarkupNode::AngleMarker { span, .. } => drop_as(span, RemovalReason::Angle),
        MarkupNode::PlusMarked { span, .. } => drop_as(span, RemovalReason::Plus),
        MarkupNode::ProsodicSymbol { span, .. } => drop_as(span, RemovalReason::Prosodic),
        MarkupNode::Punctuation { span, .. } => drop_as(span, RemovalReason::PunctuationSymbol),
        MarkupNode::DoubleParen {
            open,
            children,
            close,
        } => {
            drop_as(open, RemovalReason::DoubleParenSyntax);
            drop_as(close, RemovalReason::DoubleParenSyntax);
            if opts.keep_uncertain_words {
                out.extend(strip_seq(children, opts, removed));
            } else {
                drop_all(&children, RemovalReason::Uncertain, removed);
            }
        }
        MarkupNode::Edited {
            open,
            reparandum,
            ip,
            interregnum,
            repair,
            close,
        } => out.push(MarkupNode::Edited {
            open,
            reparandum: strip_seq(reparandum, opts, removed),
            ip,
            interregnum: strip_seq(interregnum, opts, removed),
            repair: strip_seq(repair, opts, removed),
            close,
        }),
        MarkupNode::Interregnum {
            kind,
            open,
            children,
            close,
        } => out.push(MarkupNode::Interregnum {
            kind,
            open,
            children: strip_seq(children, opts, removed),
            close,
        }),
        MarkupNode::Group {
            tag,
            open,
            children,
            close,
        } => out.push(MarkupNode::Group {
            tag,
            open,
            children: strip_seq(children, opts, removed),
            close,
        }),
    }
}

/// Records every leaf and syntax piece of `nodes` as removed for `reason`.
pub(crate) fn drop_all(
    nodes: &[MarkupNode],
    reason: RemovalReason,
    removed: &mut Vec<RemovedSpan>,
) {
    for node in nodes {
        let mut push = |span, word| removed.push(RemovedSpan { span, reason, word });
        match node {
            MarkupNode::Word { text, span } => push(span.clone(), Some(text.clone())),
            MarkupNode::Edited {
                open,
                reparandum,
                ip,
                interregnum,
                repair,
                close,
            } => {
                push(open.clone(), None);
                push(ip.clone(), None);
                push(close.clone(), None);
                drop_all(reparandum, reason, removed);
                drop_all(interregnum, reason, removed);
                drop_all(repair, reason, removed);
            }
            MarkupNode::Interregnum {
                open,
                children,
                close,
                ..
            }
            | MarkupNode::Group {
                open,
                children,
                close,
                ..
            }
            | MarkupNode::DoubleParen {
                open,
                children,
                close,
            } => {
                push(open.clone(), None);
                push(close.clone(), None);
                drop_all(children, reason, removed);
            }
            other => push(other.span(), None),
        }
    }
}
