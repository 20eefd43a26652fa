use super::{InterregnumKind, MarkupNode, ParseError, Span};

/// Characters that end a word run.
fn is_special(b: u8) -> bool {
    matches!(
        b,
        b'[' | b']' | b'{' | b'}' | b'<' | b'>' | b'(' | b')' | b'+' | b'#' | b'/'
    )
}

/// What a nested sequence is waiting for.
#[derive(Clone, Copy)]
enum Until {
    Eof,
    /// Inside `[ ... ]` opened at the given byte; `ip_allowed` before the `+`.
    Bracket {
        open: usize,
        ip_allowed: bool,
    },
    Brace {
        open: usize,
    },
    DoubleParen {
        open: usize,
    },
}

enum Stop {
    Eof,
    Close(Span),
    Ip(Span),
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

/// Parses one slash unit of markup into a node sequence.
///
/// Unmatched brackets, braces and interruption points are errors; nothing is
/// repaired silently.
pub fn parse_markup(raw: &str) -> Result<Vec<MarkupNode>, ParseError> {
    let mut p = Parser {
        src: raw,
        bytes: raw.as_bytes(),
        pos: 0,
    };
    let (nodes, _) = p.seq(Until::Eof)?;
    Ok(nodes)
}

impl<'a> Parser<'a> {
    fn peek(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn ws_before(&self, at: usize) -> bool {
        at == 0
            || self.src[..at]
                .chars()
                .next_back()
                .is_some_and(char::is_whitespace)
    }

    fn ws_after(&self, at: usize) -> bool {
        at >= self.src.len()
            || self.src[at..]
                .chars()
                .next()
                .is_some_and(char::is_whitespace)
    }

    /// True when `lit` starts here and stands alone between whitespace.
    fn standalone(&self, lit: &str) -> bool {
        self.rest().starts_with(lit)
            && self.ws_before(self.pos)
            && self.ws_after(self.pos + lit.len())
    }

    fn take(&mut self, len: usize) -> (String, Span) {
        let span = self.pos..self.pos + len;
        self.pos += len;
        (self.src[span.clone()].to_string(), span)
    }

    fn punct(&mut self, len: usize) -> MarkupNode {
        let (raw, span) = self.take(len);
        MarkupNode::Punctuation { raw, span }
    }

    fn seq(&mut self, until: Until) -> Result<(Vec<MarkupNode>, Stop), ParseError> {
        let mut nodes = Vec::new();
        loop {
            self.skip_ws();
            let Some(b) = self.peek(0) else {
                return match until {
                    Until::Eof => Ok((nodes, Stop::Eof)),
                    Until::Bracket { open, .. } => Err(ParseError::UnbalancedBracket(open)),
                    Until::Brace { open } => Err(ParseError::UnbalancedBrace(open)),
                    Until::DoubleParen { open } => Err(ParseError::UnbalancedParen(open)),
                };
            };
            let start = self.pos;
            match b {
                b'[' if self.standalone("[[") => nodes.push(self.punct(2)),
                b'[' => nodes.push(self.edited()?),
                b']' if self.standalone("]]") => nodes.push(self.punct(2)),
                b']' => match until {
                    Until::Bracket { .. } => {
                        self.pos += 1;
                        return Ok((nodes, Stop::Close(start..start + 1)));
                    }
                    _ => return Err(ParseError::UnbalancedBracket(start)),
                },
                b'+' if self.rest().starts_with("+>") => nodes.push(self.punct(2)),
                b'+' if self.peek(1).is_none_or(|n| {
                    n.is_ascii_whitespace() || matches!(n, b'[' | b']' | b'{' | b'}')
                }) =>
                {
                    match until {
                        Until::Bracket {
                            ip_allowed: true, ..
                        } => {
                            self.pos += 1;
                            return Ok((nodes, Stop::Ip(start..start + 1)));
                        }
                        _ => return Err(ParseError::StrayInterruptionPoint(start)),
                    }
                }
                b'+' => nodes.push(self.plus_marked()),
                b'{' => nodes.push(self.curly()?),
                b'}' => match until {
                    Until::Brace { .. } => {
                        self.pos += 1;
                        return Ok((nodes, Stop::Close(start..start + 1)));
                    }
                    _ => return Err(ParseError::UnbalancedBrace(start)),
                },
                b'(' => nodes.push(self.paren()?),
                b')' => {
                    if let (Until::DoubleParen { .. }, Some(b')')) = (until, self.peek(1)) {
                        self.pos += 2;
                        return Ok((nodes, Stop::Close(start..start + 2)));
                    }
                    if self.standalone("))") {
                        nodes.push(self.punct(2));
                    } else {
                        nodes.push(self.punct(1));
                    }
                }
                b'<' => nodes.push(self.angle()?),
                b'>' => nodes.push(self.punct(1)),
                b'/' if self.rest().starts_with("/>") => nodes.push(self.punct(2)),
                b'/' | b'#' => {
                    self.pos += 1;
                    nodes.push(MarkupNode::ProsodicSymbol {
                        symbol: b as char,
                        span: start..start + 1,
                    });
                }
                _ => nodes.push(self.word()),
            }
        }
    }

    fn word(&mut self) -> MarkupNode {
        let start = self.pos;
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() || (c.is_ascii() && is_special(c as u8)) {
                break;
            }
            self.pos += c.len_utf8();
        }
        let span = start..self.pos;
        let text = self.src[span.clone()].to_string();
        match text.as_str() {
            "%" | "**" | "&" => MarkupNode::Punctuation { raw: text, span },
            _ => MarkupNode::Word { text, span },
        }
    }

    fn edited(&mut self) -> Result<MarkupNode, ParseError> {
        let open_at = self.pos;
        self.pos += 1;
        let (reparandum, stop) = self.seq(Until::Bracket {
            open: open_at,
            ip_allowed: true,
        })?;
        let ip = match stop {
            Stop::Ip(span) => span,
            _ => return Err(ParseError::MissingInterruptionPoint(open_at)),
        };
        let mut interregnum = Vec::new();
        loop {
            self.skip_ws();
            if self.peek(0) == Some(b'{') && self.interregnum_opener().is_some() {
                interregnum.push(self.curly()?);
            } else {
                break;
            }
        }
        let (repair, stop) = self.seq(Until::Bracket {
            open: open_at,
            ip_allowed: false,
        })?;
        let close = match stop {
            Stop::Close(span) => span,
            _ => return Err(ParseError::UnbalancedBracket(open_at)),
        };
        Ok(MarkupNode::Edited {
            open: open_at..open_at + 1,
            reparandum,
            ip,
            interregnum,
            repair,
            close,
        })
    }

    /// Kind and opener length if the `{` here starts an interregnum.
    fn interregnum_opener(&self) -> Option<(InterregnumKind, usize)> {
        match (self.peek(1), self.peek(2)) {
            (Some(n), _) if n.is_ascii_whitespace() => Some((InterregnumKind::Unknown, 1)),
            (Some(t), next) if next.is_none_or(|n| n.is_ascii_whitespace() || n == b'}') => {
                InterregnumKind::from_tag(t).map(|k| (k, 2))
            }
            _ => None,
        }
    }

    fn curly(&mut self) -> Result<MarkupNode, ParseError> {
        let open_at = self.pos;
        if let Some((kind, len)) = self.interregnum_opener() {
            self.pos += len;
            let (children, close) = self.brace_body(open_at)?;
            return Ok(MarkupNode::Interregnum {
                kind,
                open: open_at..open_at + len,
                children,
                close,
            });
        }
        let tagged = self.peek(1).is_some_and(|t| t.is_ascii_uppercase())
            && self
                .peek(2)
                .is_none_or(|n| n.is_ascii_whitespace() || n == b'}');
        if tagged {
            let tag = self.peek(1).unwrap() as char;
            self.pos += 2;
            let (children, close) = self.brace_body(open_at)?;
            return Ok(MarkupNode::Group {
                tag,
                open: open_at..open_at + 2,
                children,
                close,
            });
        }
        // `{breathing}`: noise up to the first closing brace.
        match self.rest().find('}') {
            Some(end) => {
                let (raw, span) = self.take(end + 1);
                Ok(MarkupNode::NoiseMarker { raw, span })
            }
            None => Err(ParseError::UnbalancedBrace(open_at)),
        }
    }

    fn brace_body(&mut self, open_at: usize) -> Result<(Vec<MarkupNode>, Span), ParseError> {
        match self.seq(Until::Brace { open: open_at })? {
            (children, Stop::Close(close)) => Ok((children, close)),
            _ => Err(ParseError::UnbalancedBrace(open_at)),
        }
    }

    fn plus_marked(&mut self) -> MarkupNode {
        let start = self.pos;
        self.pos += 1;
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() || matches!(c, '[' | ']' | '{' | '}') {
                break;
            }
            self.pos += c.len_utf8();
        }
        let span = start..self.pos;
        let inner = &self.src[start + 1..self.pos];
        let text = inner.strip_suffix('+').unwrap_or(inner).to_string();
        MarkupNode::PlusMarked { text, span }
    }

    fn paren(&mut self) -> Result<MarkupNode, ParseError> {
        let start = self.pos;
        if self.standalone("()") {
            return Ok(self.punct(2));
        }
        if self.rest().starts_with("((") {
            if !self.src[start + 2..].contains("))") {
                return Ok(self.punct(2));
            }
            self.pos += 2;
            return match self.seq(Until::DoubleParen { open: start })? {
                (children, Stop::Close(close)) => Ok(MarkupNode::DoubleParen {
                    open: start..start + 2,
                    children,
                    close,
                }),
                _ => Err(ParseError::UnbalancedParen(start)),
            };
        }
        // `(laughter)` context marker.
        match self.rest().find(')') {
            Some(end) => {
                let (raw, span) = self.take(end + 1);
                Ok(MarkupNode::NoiseMarker { raw, span })
            }
            None => Ok(self.punct(1)),
        }
    }

    fn angle(&mut self) -> Result<MarkupNode, ParseError> {
        let start = self.pos;
        if self.rest().starts_with("<]>") {
            return Ok(self.punct(3));
        }
        if self.rest().starts_with("<<") {
            return match self.rest()[2..].find(">>") {
                Some(end) => {
                    let (raw, span) = self.take(end + 4);
                    Ok(MarkupNode::NoiseMarker { raw, span })
                }
                None => Err(ParseError::UnterminatedMarker(start)),
            };
        }
        match self.rest().find('>') {
            Some(end) => {
                let (raw, span) = self.take(end + 1);
                Ok(MarkupNode::AngleMarker { raw, span })
            }
            None => Err(ParseError::UnterminatedMarker(start)),
        }
    }
}
