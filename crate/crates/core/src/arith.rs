//! Arithmetic expressions shared by requirement predicates and manual fitness
//! expressions. The leaf type differs: predicates read signal samples, manual
//! fitness reads whole-trace functionals.

use std::fmt;

use crate::syntax::{Cursor, SyntaxError, TokenKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Arith<L> {
    Const(f64),
    Leaf(L),
    Neg(Box<Arith<L>>),
    Abs(Box<Arith<L>>),
    Add(Box<Arith<L>>, Box<Arith<L>>),
    Sub(Box<Arith<L>>, Box<Arith<L>>),
    Mul(Box<Arith<L>>, Box<Arith<L>>),
    Div(Box<Arith<L>>, Box<Arith<L>>),
}

impl<L> Arith<L> {
    /// Visits every leaf in left-to-right order.
    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a L)) {
        match self {
            Arith::Const(_) => {}
            Arith::Leaf(leaf) => f(leaf),
            Arith::Neg(e) | Arith::Abs(e) => e.for_each_leaf(f),
            Arith::Add(a, b) | Arith::Sub(a, b) | Arith::Mul(a, b) | Arith::Div(a, b) => {
                a.for_each_leaf(f);
                b.for_each_leaf(f);
            }
        }
    }
}

impl<L: fmt::Display> fmt::Display for Arith<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arith::Const(v) => write!(f, "{v}"),
            Arith::Leaf(leaf) => write!(f, "{leaf}"),
            Arith::Neg(e) => write!(f, "-({e})"),
            Arith::Abs(e) => write!(f, "abs({e})"),
            Arith::Add(a, b) => write!(f, "({a} + {b})"),
            Arith::Sub(a, b) => write!(f, "({a} - {b})"),
            Arith::Mul(a, b) => write!(f, "({a} * {b})"),
            Arith::Div(a, b) => write!(f, "({a} / {b})"),
        }
    }
}

/// Parses `sum := product (('+' | '-') product)*`.
///
/// `leaf` is offered the cursor whenever an atom is expected and is not a
/// literal, `abs(...)` or a parenthesized expression; it must either consume
/// a leaf or return an error.
pub fn parse_sum<L, F>(cur: &mut Cursor<'_>, leaf: &mut F) -> Result<Arith<L>, SyntaxError>
where
    F: FnMut(&mut Cursor<'_>) -> Result<L, SyntaxError>,
{
    let mut lhs = parse_product(cur, leaf)?;
    loop {
        if cur.eat(&TokenKind::Plus) {
            let rhs = parse_product(cur, leaf)?;
            lhs = Arith::Add(Box::new(lhs), Box::new(rhs));
        } else if cur.eat(&TokenKind::Minus) {
            let rhs = parse_product(cur, leaf)?;
            lhs = Arith::Sub(Box::new(lhs), Box::new(rhs));
        } else {
            return Ok(lhs);
        }
    }
}

fn parse_product<L, F>(cur: &mut Cursor<'_>, leaf: &mut F) -> Result<Arith<L>, SyntaxError>
where
    F: FnMut(&mut Cursor<'_>) -> Result<L, SyntaxError>,
{
    let mut lhs = parse_unary(cur, leaf)?;
    loop {
        if cur.eat(&TokenKind::Star) {
            let rhs = parse_unary(cur, leaf)?;
            lhs = Arith::Mul(Box::new(lhs), Box::new(rhs));
        } else if cur.eat(&TokenKind::Slash) {
            let rhs = parse_unary(cur, leaf)?;
            lhs = Arith::Div(Box::new(lhs), Box::new(rhs));
        } else {
            return Ok(lhs);
        }
    }
}

fn parse_unary<L, F>(cur: &mut Cursor<'_>, leaf: &mut F) -> Result<Arith<L>, SyntaxError>
where
    F: FnMut(&mut Cursor<'_>) -> Result<L, SyntaxError>,
{
    if cur.eat(&TokenKind::Minus) {
        // A minus directly in front of a literal is part of the literal.
        if let TokenKind::Number(v) = cur.peek_kind() {
            let v = *v;
            cur.advance();
            return Ok(Arith::Const(-v));
        }
        return Ok(Arith::Neg(Box::new(parse_unary(cur, leaf)?)));
    }
    parse_atom(cur, leaf)
}

fn parse_atom<L, F>(cur: &mut Cursor<'_>, leaf: &mut F) -> Result<Arith<L>, SyntaxError>
where
    F: FnMut(&mut Cursor<'_>) -> Result<L, SyntaxError>,
{
    match cur.peek_kind() {
        TokenKind::Number(v) => {
            let v = *v;
            cur.advance();
            Ok(Arith::Const(v))
        }
        TokenKind::LParen => {
            cur.advance();
            let inner = parse_sum(cur, leaf)?;
            cur.expect(&TokenKind::RParen)?;
            Ok(inner)
        }
        TokenKind::Ident(name) if name == "abs" && cur.peek_nth(1) == &TokenKind::LParen => {
            cur.advance();
            cur.advance();
            let inner = parse_sum(cur, leaf)?;
            cur.expect(&TokenKind::RParen)?;
            Ok(Arith::Abs(Box::new(inner)))
        }
        _ => Ok(Arith::Leaf(leaf(cur)?)),
    }
}
