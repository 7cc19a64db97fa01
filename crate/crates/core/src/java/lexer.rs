//! Tokenizer for the subset of Java the analyzer needs. Comments and
//! whitespace are dropped; every token keeps its byte span and line.

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    TextBlock,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    pub line: u32,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Number | TokenKind::Str | TokenKind::Char | TokenKind::TextBlock
        )
    }
}

/// Byte offsets of line starts; line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex {
            starts,
            len: src.len(),
        }
    }

    pub fn line_of(&self, offset: usize) -> u32 {
        match self.starts.binary_search(&offset) {
            Ok(i) => i as u32 + 1,
            Err(i) => i as u32,
        }
    }

    /// Byte span of a line, excluding its trailing newline.
    pub fn span(&self, line: u32) -> Option<(usize, usize)> {
        let idx = (line as usize).checked_sub(1)?;
        let start = *self.starts.get(idx)?;
        let end = self
            .starts
            .get(idx + 1)
            .map(|next| next - 1)
            .unwrap_or(self.len);
        Some((start, end))
    }

    pub fn line_count(&self) -> u32 {
        self.starts.len() as u32
    }

    pub fn line_start(&self, line: u32) -> Option<usize> {
        self.span(line).map(|(s, _)| s)
    }
}

const MULTI_PUNCT: [&str; 22] = [
    ">>>=", "<<=", "...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let lines = LineIndex::new(src);
    let mut tokens = Vec::new();
    let mut i = 0;
    let err = |at: usize, msg: &str| ParseError::new(lines.line_of(at), msg);
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match src[i + 2..].find("*/") {
                Some(off) => i = i + 2 + off + 2,
                None => return Err(err(start, "unterminated block comment")),
            }
            continue;
        }
        let kind;
        if src[i..].starts_with("\"\"\"") {
            let mut j = i + 3;
            loop {
                match src[j..].find("\"\"\"") {
                    Some(off) => {
                        let close = j + off;
                        // an escaped quote does not close the block
                        if close > 0 && bytes[close - 1] == b'\\' && !escaped_backslash(bytes, close - 1) {
                            j = close + 1;
                            continue;
                        }
                        i = close + 3;
                        break;
                    }
                    None => return Err(err(start, "unterminated text block")),
                }
            }
            kind = TokenKind::TextBlock;
        } else if b == b'"' || b == b'\'' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        return Err(err(start, "unterminated string or char literal"))
                    }
                    Some(b'\\') => i += 2,
                    Some(&c) if c == b => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            kind = if b == b'"' { TokenKind::Str } else { TokenKind::Char };
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let hex = matches!(&bytes[start..], [b'0', b'x' | b'X', ..]);
            i += 1;
            while i < bytes.len() {
                let c = bytes[i];
                let exponent_sign = (c == b'+' || c == b'-')
                    && (matches!(bytes[i - 1], b'p' | b'P') || (!hex && matches!(bytes[i - 1], b'e' | b'E')));
                if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || exponent_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokenKind::Number;
        } else if is_ident_start(src, i) {
            while i < bytes.len() && is_ident_continue(src, i) {
                i += src[i..].chars().next().map(char::len_utf8).unwrap_or(1);
            }
            kind = TokenKind::Ident;
        } else {
            let len = MULTI_PUNCT
                .iter()
                .find(|p| src[i..].starts_with(*p))
                .map(|p| p.len())
                .unwrap_or_else(|| src[i..].chars().next().map(char::len_utf8).unwrap_or(1));
            i += len;
            kind = TokenKind::Punct;
        }
        tokens.push(Token {
            kind,
            start,
            end: i,
            line: lines.line_of(start),
        });
    }
    Ok(tokens)
}

fn escaped_backslash(bytes: &[u8], pos: usize) -> bool {
    let mut count = 0;
    let mut p = pos;
    while p > 0 && bytes[p - 1] == b'\\' {
        count += 1;
        p -= 1;
    }
    count % 2 == 1
}

fn is_ident_start(src: &str, i: usize) -> bool {
    src[i..]
        .chars()
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
}

fn is_ident_continue(src: &str, i: usize) -> bool {
    src[i..]
        .chars()
        .next()
        .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$')
}
