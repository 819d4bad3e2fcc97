//! A small lexer for Lean source text.
//!
//! It is not a Lean parser. It only needs to be good enough to split
//! expressions into identifiers, numerals and symbols (so that textual
//! comparisons are whitespace-insensitive) and to skip comments when looking
//! for `sorry` holes.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Symbol,
    Str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Range<usize>,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

const MULTI_CHAR_SYMBOLS: &[&str] = &[
    ":=", "=>", "->", "<-", "<=", ">=", "!=", "::", "++", "..", "<;>", "|>.", "|>", "<|", "&&", "||",
];

fn is_ident_start(c: char) -> bool {
    c == '_' || (c.is_alphabetic() && !is_symbol_letter(c))
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c == '\'' || c == '!' || c == '?' || (c.is_alphanumeric() && !is_symbol_letter(c))
}

// Greek λ, Π, Σ are binders/notation in Lean, not identifier characters.
fn is_symbol_letter(c: char) -> bool {
    matches!(c, 'λ' | 'Π' | 'Σ')
}

/// Tokenize Lean source, dropping whitespace and comments.
pub fn tokenize(src: &str) -> Vec<Token> {
    let bytes: Vec<(usize, char)> = src.char_indices().collect();
    let end_of = |i: usize| bytes.get(i).map(|&(b, _)| b).unwrap_or(src.len());
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let (start, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // line comment
        if c == '-' && matches!(bytes.get(i + 1), Some((_, '-'))) {
            while i < bytes.len() && bytes[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        // nested block comment
        if c == '/' && matches!(bytes.get(i + 1), Some((_, '-'))) {
            let mut depth = 0usize;
            while i < bytes.len() {
                let here = bytes[i].1;
                let next = bytes.get(i + 1).map(|&(_, n)| n);
                if here == '/' && next == Some('-') {
                    depth += 1;
                    i += 2;
                } else if here == '-' && next == Some('/') {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    i += 1;
                }
            }
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].1 != '"' {
                if bytes[j].1 == '\\' {
                    j += 1;
                }
                j += 1;
            }
            let stop = (j + 1).min(bytes.len());
            tokens.push(Token {
                kind: TokenKind::Str,
                text: src[start..end_of(stop)].to_string(),
                span: start..end_of(stop),
            });
            i = stop;
            continue;
        }
        if c == '«' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].1 != '»' {
                j += 1;
            }
            let stop = (j + 1).min(bytes.len());
            i = continue_ident(&bytes, stop);
            tokens.push(Token {
                kind: TokenKind::Ident,
                text: src[start..end_of(i)].to_string(),
                span: start..end_of(i),
            });
            continue;
        }
        if is_ident_start(c) {
            i = continue_ident(&bytes, i + 1);
            tokens.push(Token {
                kind: TokenKind::Ident,
                text: src[start..end_of(i)].to_string(),
                span: start..end_of(i),
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].1.is_ascii_digit() {
                j += 1;
            }
            if j + 1 < bytes.len() && bytes[j].1 == '.' && bytes[j + 1].1.is_ascii_digit() {
                j += 1;
                while j < bytes.len() && bytes[j].1.is_ascii_digit() {
                    j += 1;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number,
                text: src[start..end_of(j)].to_string(),
                span: start..end_of(j),
            });
            i = j;
            continue;
        }
        let rest = &src[start..];
        let width = MULTI_CHAR_SYMBOLS
            .iter()
            .filter(|s| rest.starts_with(*s))
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(1);
        let stop = i + width;
        tokens.push(Token {
            kind: TokenKind::Symbol,
            text: src[start..end_of(stop)].to_string(),
            span: start..end_of(stop),
        });
        i = stop;
    }
    tokens
}

// Dotted names continue through `.` only when another identifier follows.
fn continue_ident(bytes: &[(usize, char)], mut i: usize) -> usize {
    loop {
        while i < bytes.len() && is_ident_continue(bytes[i].1) {
            i += 1;
        }
        if i + 1 < bytes.len() && bytes[i].1 == '.' && (is_ident_start(bytes[i + 1].1) || bytes[i + 1].1 == '«') {
            i += 1;
            if bytes[i].1 == '«' {
                while i < bytes.len() && bytes[i].1 != '»' {
                    i += 1;
                }
                i = (i + 1).min(bytes.len());
            }
            continue;
        }
        return i;
    }
}

/// Byte ranges of every `sorry` token outside comments.
pub fn sorry_spans(src: &str) -> Vec<Range<usize>> {
    tokenize(src)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Ident && t.text == "sorry")
        .map(|t| t.span)
        .collect()
}
