use std::sync::Arc;

use super::diag::Diagnostic;
use crate::rational::{parse_rational, Rational};
use crate::span::SourceSpan;

/// Words that cannot name entities, roles, variables, sorts or relations.
pub const RESERVED: &[&str] = &[
    "theory", "end", "sort", "role", "relation", "param", "axiom", "macro", "alias", "forall",
    "exists", "not", "and", "or", "next", "always", "eventually", "until", "before", "final",
    "true", "false", "scenario", "entity", "trace", "length", "state", "rules", "horizon", "force",
    "unforce", "with", "active", "passive", "gravity", "umph", "rule", "when", "do", "addforce",
    "removeforce", "delta", "theta", "measure", "drop",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(Rational),
    /// `$n` in relation templates.
    Dollar(usize),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

const SYMBOLS: &[&str] = &[
    ":=", "+=", "->", "<=", ">=", "==", "!=", "(", ")", ",", ":", ".", "=", "<", ">", "+", "-", "*", ";",
    "[", "]", "{", "}",
];

pub fn lex(src: &str, file: &Arc<str>) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let span = |line, column, length| SourceSpan {
        file: file.clone(),
        line,
        column,
        length,
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else if c.is_ascii_digit() {
            let digits = |i: &mut usize| {
                while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                    *i += 1;
                }
            };
            digits(&mut i);
            let followed_by_digit = |k: usize| k + 1 < bytes.len() && bytes[k + 1].is_ascii_digit();
            if i < bytes.len() && matches!(bytes[i], b'.' | b'/') && followed_by_digit(i) {
                i += 1;
                digits(&mut i);
            }
            let text = &src[start..i];
            match parse_rational(text) {
                Some(v) => Tok::Num(v),
                None => {
                    return Err(Diagnostic::error(
                        "syntax",
                        format!("malformed number `{text}`"),
                        span(line, col, i - start),
                    ))
                }
            }
        } else if c == b'$' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            match src[start + 1..i].parse::<usize>() {
                Ok(n) if n >= 1 => Tok::Dollar(n),
                _ => {
                    return Err(Diagnostic::error(
                        "syntax",
                        "expected a positive argument index after `$`",
                        span(line, col, i - start),
                    ))
                }
            }
        } else if let Some(s) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            i += s.len();
            Tok::Sym(s)
        } else {
            let ch = src[i..].chars().next().expect("in bounds");
            return Err(Diagnostic::error(
                "syntax",
                format!("unexpected character `{ch}`"),
                span(line, col, 1),
            ));
        };
        toks.push(Token {
            tok,
            span: span(line, col, i - start),
        });
        col += src[start..i].chars().count();
    }
    toks.push(Token {
        tok: Tok::Eof,
        span: span(line, col, 0),
    });
    Ok(toks)
}
