//! Tokenizer and error positions shared by the requirement, manual fitness
//! and test-suite grammars.

use std::fmt;

use thiserror::Error;

/// A syntax error located by byte offset, with the matching 1-based line and
/// column for display.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn at(source: &str, offset: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(source.len());
        let before = &source[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Self {
            offset,
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semicolon,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Le,
    Lt,
    Ge,
    Gt,
    /// `->`
    Arrow,
    /// `=>`
    FatArrow,
    /// `=`
    Assign,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident(name) => return write!(f, "`{name}`"),
            TokenKind::Number(v) => return write!(f, "number {v}"),
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::LBracket => "`[`",
            TokenKind::RBracket => "`]`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::Comma => "`,`",
            TokenKind::Semicolon => "`;`",
            TokenKind::Colon => "`:`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::Slash => "`/`",
            TokenKind::Le => "`<=`",
            TokenKind::Lt => "`<`",
            TokenKind::Ge => "`>=`",
            TokenKind::Gt => "`>`",
            TokenKind::Arrow => "`->`",
            TokenKind::FatArrow => "`=>`",
            TokenKind::Assign => "`=`",
            TokenKind::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

/// Splits `source` into tokens. `#` starts a comment running to end of line.
pub fn tokenize(source: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let next = bytes.get(i + 1).copied();
        let (kind, len) = match c {
            b'(' => (TokenKind::LParen, 1),
            b')' => (TokenKind::RParen, 1),
            b'[' => (TokenKind::LBracket, 1),
            b']' => (TokenKind::RBracket, 1),
            b'{' => (TokenKind::LBrace, 1),
            b'}' => (TokenKind::RBrace, 1),
            b',' => (TokenKind::Comma, 1),
            b';' => (TokenKind::Semicolon, 1),
            b':' => (TokenKind::Colon, 1),
            b'+' => (TokenKind::Plus, 1),
            b'*' => (TokenKind::Star, 1),
            b'/' => (TokenKind::Slash, 1),
            b'-' if next == Some(b'>') => (TokenKind::Arrow, 2),
            b'-' => (TokenKind::Minus, 1),
            b'<' if next == Some(b'=') => (TokenKind::Le, 2),
            b'<' => (TokenKind::Lt, 1),
            b'>' if next == Some(b'=') => (TokenKind::Ge, 2),
            b'>' => (TokenKind::Gt, 1),
            b'=' if next == Some(b'>') => (TokenKind::FatArrow, 2),
            b'=' => (TokenKind::Assign, 1),
            b'0'..=b'9' | b'.' => {
                let len = number_len(&bytes[i..]);
                if len == 0 {
                    return Err(SyntaxError::at(source, i, "malformed number"));
                }
                let text = &source[i..i + len];
                let value: f64 = text.parse().map_err(|_| {
                    SyntaxError::at(source, i, format!("malformed number `{text}`"))
                })?;
                if !value.is_finite() {
                    return Err(SyntaxError::at(
                        source,
                        i,
                        format!("number `{text}` is out of range"),
                    ));
                }
                (TokenKind::Number(value), len)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let len = bytes[i..]
                    .iter()
                    .take_while(|b| b.is_ascii_alphanumeric() || **b == b'_')
                    .count();
                (TokenKind::Ident(source[i..i + len].to_string()), len)
            }
            _ => {
                let ch = source[i..].chars().next().unwrap_or('?');
                return Err(SyntaxError::at(
                    source,
                    i,
                    format!("unexpected character `{ch}`"),
                ));
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
        i += len;
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: source.len(),
    });
    Ok(tokens)
}

/// Length of the decimal literal at the start of `bytes`: digits, an optional
/// fraction and an optional exponent.
fn number_len(bytes: &[u8]) -> usize {
    let digits = |from: usize| {
        bytes[from..]
            .iter()
            .take_while(|b| b.is_ascii_digit())
            .count()
    };
    let mut len = digits(0);
    let mut mantissa_digits = len;
    if bytes.get(len) == Some(&b'.') {
        let frac = digits(len + 1);
        mantissa_digits += frac;
        len += 1 + frac;
    }
    if mantissa_digits == 0 {
        return 0;
    }
    if matches!(bytes.get(len), Some(b'e' | b'E')) {
        let mut exp_start = len + 1;
        if matches!(bytes.get(exp_start), Some(b'+' | b'-')) {
            exp_start += 1;
        }
        let exp = digits(exp_start);
        if exp > 0 {
            len = exp_start + exp;
        }
    }
    len
}

/// Cursor over a token stream with backtracking support.
#[derive(Debug, Clone)]
pub struct Cursor<'a> {
    pub source: &'a str,
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(source: &'a str, tokens: &'a [Token]) -> Self {
        Self {
            source,
            tokens,
            pos: 0,
        }
    }

    pub fn peek(&self) -> &'a Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    pub fn peek_kind(&self) -> &'a TokenKind {
        &self.peek().kind
    }

    pub fn peek_nth(&self, n: usize) -> &'a TokenKind {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].kind
    }

    pub fn advance(&mut self) -> &'a Token {
        let tok = self.peek();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn reset(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek_kind(), TokenKind::Eof)
    }

    pub fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_kind() == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek_kind(), TokenKind::Ident(name) if name == word)
    }

    pub fn eat_keyword(&mut self, word: &str) -> bool {
        if self.is_keyword(word) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, kind: &TokenKind) -> Result<&'a Token, SyntaxError> {
        if self.peek_kind() == kind {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    pub fn expect_keyword(&mut self, word: &str) -> Result<(), SyntaxError> {
        if self.eat_keyword(word) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, usize), SyntaxError> {
        let tok = self.peek();
        match &tok.kind {
            TokenKind::Ident(name) => {
                self.advance();
                Ok((name.clone(), tok.offset))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    /// A numeric literal with an optional leading minus sign.
    pub fn expect_number(&mut self) -> Result<f64, SyntaxError> {
        let negative = self.eat(&TokenKind::Minus);
        match self.peek_kind() {
            TokenKind::Number(v) => {
                let v = *v;
                self.advance();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    pub fn error_here(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::at(self.source, self.peek().offset, message)
    }

    pub fn unexpected(&self, expected: &str) -> SyntaxError {
        self.error_here(format!("expected {expected}, found {}", self.peek_kind()))
    }
}
