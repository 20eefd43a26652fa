use crate::model::{Category, Conversation, LabelSet};

/// The cleaned transcript, one `SPEAKER: text` line per turn. Turns with
/// every token removed are left out.
pub fn render_clean(conv: &Conversation, labels: &LabelSet) -> String {
    let mut out = String::new();
    for turn in conv.turns() {
        let kept: Vec<&str> = turn
            .tokens()
            .filter(|t| !labels.contains(t.id))
            .map(|t| t.text.as_str())
            .collect();
        if !kept.is_empty() {
            out.push_str(&turn.speaker);
            out.push_str(": ");
            out.push_str(&kept.join(" "));
            out.push('\n');
        }
    }
    out
}

/// The full transcript with each run of removed tokens wrapped as
/// `[X: ...]`, where `X` is the category code.
pub fn render_marked(conv: &Conversation, labels: &LabelSet) -> String {
    let mut out = String::new();
    for turn in conv.turns() {
        out.push_str(&turn.speaker);
        out.push(':');
        let mut open: Option<Category> = None;
        for t in turn.tokens() {
            let label = labels.get(t.id);
            if open.is_some() && label != open {
                out.push(']');
                open = None;
            }
            out.push(' ');
            if let (Some(c), None) = (label, open) {
                out.push('[');
                out.push(c.code());
                out.push_str(": ");
                open = Some(c);
            }
            out.push_str(&t.text);
        }
        if open.is_some() {
            out.push(']');
        }
        out.push('\n');
    }
    out
}
