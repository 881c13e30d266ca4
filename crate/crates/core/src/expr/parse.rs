//! Recursive-descent parser for the arithmetic DSL.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)?
//! exponent:= INTEGER ('^' exponent)?        right-associative
//! atom    := NUMBER | IDENT | '(' expr ')'
//! ```

use std::fmt;

use thiserror::Error;

use super::Expr;
use crate::hyperreal::{Hyperreal, Space};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    BadNumber(String),
    UnknownIdentifier(String),
    UnexpectedToken(String),
    UnexpectedEnd,
    UnclosedParen,
    BadExponent(String),
    Empty,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
            Self::BadNumber(s) => write!(f, "malformed number `{s}`"),
            Self::UnknownIdentifier(s) => write!(f, "unknown identifier `{s}`"),
            Self::UnexpectedToken(s) => write!(f, "unexpected `{s}`"),
            Self::UnexpectedEnd => f.write_str("unexpected end of input"),
            Self::UnclosedParen => f.write_str("unclosed parenthesis"),
            Self::BadExponent(s) => write!(
                f,
                "exponent must be a nonnegative integer literal, found `{s}`"
            ),
            Self::Empty => f.write_str("empty expression"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Number(s) | Self::Ident(s) => f.write_str(s),
            Self::Plus => f.write_str("+"),
            Self::Minus => f.write_str("-"),
            Self::Star => f.write_str("*"),
            Self::Slash => f.write_str("/"),
            Self::Caret => f.write_str("^"),
            Self::LParen => f.write_str("("),
            Self::RParen => f.write_str(")"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    line: usize,
    column: usize,
}

fn lex(text: &str, line0: usize, column0: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut line, mut column) = (line0, column0);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        let single = match c {
            '\n' => {
                line += 1;
                column = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {
                column += 1;
                i += 1;
                continue;
            }
            '+' => Some(TokenKind::Plus),
            '-' => Some(TokenKind::Minus),
            '*' => Some(TokenKind::Star),
            '/' => Some(TokenKind::Slash),
            '^' => Some(TokenKind::Caret),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            _ => None,
        };
        let (kind, len) = if let Some(kind) = single {
            (kind, 1)
        } else if c.is_ascii_digit() || c == '.' {
            let len = number_len(&chars[i..]);
            let s: String = chars[i..i + len].iter().collect();
            if s.parse::<f64>().is_err() {
                return Err(ParseError {
                    line: start_line,
                    column: start_col,
                    kind: ParseErrorKind::BadNumber(s),
                });
            }
            (TokenKind::Number(s), len)
        } else if c.is_ascii_alphabetic() || c == '_' {
            let len = chars[i..]
                .iter()
                .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                .count();
            (TokenKind::Ident(chars[i..i + len].iter().collect()), len)
        } else {
            return Err(ParseError {
                line: start_line,
                column: start_col,
                kind: ParseErrorKind::UnexpectedChar(c),
            });
        };
        tokens.push(Token {
            kind,
            line: start_line,
            column: start_col,
        });
        i += len;
        column += len;
    }
    Ok(tokens)
}

/// Length of the numeric literal at the start of `chars`: digits, an
/// optional fraction, and an optional exponent (`1e-3`) when digits follow.
fn number_len(chars: &[char]) -> usize {
    let mut n = chars.iter().take_while(|c| c.is_ascii_digit()).count();
    if chars.get(n) == Some(&'.') {
        n += 1;
        n += chars[n..].iter().take_while(|c| c.is_ascii_digit()).count();
    }
    if matches!(chars.get(n), Some('e' | 'E')) {
        let mut k = n + 1;
        if matches!(chars.get(k), Some('+' | '-')) {
            k += 1;
        }
        let digits = chars[k.min(chars.len())..]
            .iter()
            .take_while(|c| c.is_ascii_digit())
            .count();
        if digits > 0 {
            n = k + digits;
        }
    }
    n
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [String],
    space: &'a Space,
    end: (usize, usize),
}

impl Parser<'_> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        let (line, column) = self
            .tokens
            .get(self.pos)
            .map_or(self.end, |t| (t.line, t.column));
        ParseError { line, column, kind }
    }

    fn unexpected(&self) -> ParseError {
        match self.tokens.get(self.pos) {
            Some(t) => self.error_here(ParseErrorKind::UnexpectedToken(t.kind.to_string())),
            None => self.error_here(ParseErrorKind::UnexpectedEnd),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&TokenKind::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&TokenKind::Caret) {
            self.pos += 1;
            let exponent = self.exponent()?;
            return Ok(Expr::PowInt(Box::new(base), exponent));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<u32, ParseError> {
        let value = match self.peek() {
            Some(TokenKind::Number(s)) => s
                .parse::<u32>()
                .map_err(|_| self.error_here(ParseErrorKind::BadExponent(s.clone())))?,
            Some(other) => {
                return Err(self.error_here(ParseErrorKind::BadExponent(other.to_string())));
            }
            None => return Err(self.error_here(ParseErrorKind::UnexpectedEnd)),
        };
        self.pos += 1;
        if self.peek() == Some(&TokenKind::Caret) {
            self.pos += 1;
            let at = self.pos;
            let rest = self.exponent()?;
            return value.checked_pow(rest).ok_or_else(|| {
                self.pos = at;
                self.error_here(ParseErrorKind::BadExponent(format!("{value}^{rest}")))
            });
        }
        Ok(value)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(token) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error_here(ParseErrorKind::UnexpectedEnd));
        };
        match token.kind {
            TokenKind::Number(s) => {
                self.pos += 1;
                let value: f64 = s.parse().expect("validated by the lexer");
                Ok(Expr::Const(Hyperreal::from_real(value)))
            }
            TokenKind::Ident(name) => {
                if let Some(index) = self.vars.iter().position(|v| *v == name) {
                    self.pos += 1;
                    Ok(Expr::Var(index))
                } else if let Ok(g) = self.space.generator(&name) {
                    self.pos += 1;
                    Ok(Expr::Const(g))
                } else {
                    Err(self.error_here(ParseErrorKind::UnknownIdentifier(name)))
                }
            }
            TokenKind::LParen => {
                let open = self.pos;
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() == Some(&TokenKind::RParen) {
                    self.pos += 1;
                    Ok(inner)
                } else if self.peek().is_none() {
                    self.pos = open;
                    Err(self.error_here(ParseErrorKind::UnclosedParen))
                } else {
                    Err(self.unexpected())
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Parses `text` into an [`Expr`] over `vars`, resolving generator names in
/// `space` to constants. Positions in errors start at line 1, column 1.
pub fn parse(text: &str, vars: &[String], space: &Space) -> Result<Expr, ParseError> {
    parse_at(text, vars, space, 1, 1)
}

/// As [`parse`], with positions reported relative to `(line, column)`.
pub fn parse_at(
    text: &str,
    vars: &[String],
    space: &Space,
    line: usize,
    column: usize,
) -> Result<Expr, ParseError> {
    let tokens = lex(text, line, column)?;
    let end = tokens.last().map_or((line, column), |t| {
        (t.line, t.column + t.kind.to_string().chars().count())
    });
    if tokens.is_empty() {
        return Err(ParseError {
            line,
            column,
            kind: ParseErrorKind::Empty,
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        vars,
        space,
        end,
    };
    let expr = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        return Err(parser.unexpected());
    }
    Ok(expr)
}
