use crate::arith::parse_sum;
use crate::syntax::{tokenize, Cursor, SyntaxError, TokenKind};

use super::{CmpOp, Interval, StlError, StlFormula, Term};

const KEYWORDS: &[&str] = &["G", "F", "U", "not", "and", "or", "abs"];

/// Parses a requirement.
///
/// ```text
/// formula   := or ('->' formula)?
/// or        := and ('or' and)*
/// and       := until ('and' until)*
/// until     := unary ('U' interval unary)*
/// unary     := 'not' unary | ('G' | 'F') interval unary | '(' formula ')' | predicate
/// predicate := sum ('<=' | '<' | '>=' | '>') sum
/// interval  := '[' number ',' number ']'
/// ```
pub fn parse_stl(text: &str) -> Result<StlFormula, StlError> {
    let tokens = tokenize(text)?;
    let mut cur = Cursor::new(text, &tokens);
    let phi = parse_formula_tokens(&mut cur)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of formula").into());
    }
    Ok(phi)
}

/// Parses one formula starting at the cursor, leaving the cursor on the first
/// token after it. Used by the test-suite grammar, which embeds formulas.
pub fn parse_formula_tokens(cur: &mut Cursor<'_>) -> Result<StlFormula, StlError> {
    parse_implies(cur)
}

fn parse_implies(cur: &mut Cursor<'_>) -> Result<StlFormula, StlError> {
    let lhs = parse_or(cur)?;
    if cur.eat(&TokenKind::Arrow) {
        let rhs = parse_implies(cur)?;
        return Ok(StlFormula::implies(lhs, rhs));
    }
    Ok(lhs)
}

fn parse_or(cur: &mut Cursor<'_>) -> Result<StlFormula, StlError> {
    let mut lhs = parse_and(cur)?;
    while cur.eat_keyword("or") {
        lhs = StlFormula::or(lhs, parse_and(cur)?);
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor<'_>) -> Result<StlFormula, StlError> {
    let mut lhs = parse_until(cur)?;
    while cur.eat_keyword("and") {
        lhs = StlFormula::and(lhs, parse_until(cur)?);
    }
    Ok(lhs)
}

fn parse_until(cur: &mut Cursor<'_>) -> Result<StlFormula, StlError> {
    let mut lhs = parse_unary(cur)?;
    while cur.eat_keyword("U") {
        let interval = parse_interval(cur)?;
        let rhs = parse_unary(cur)?;
        lhs = StlFormula::until(interval, lhs, rhs);
    }
    Ok(lhs)
}

fn parse_unary(cur: &mut Cursor<'_>) -> Result<StlFormula, StlError> {
    if cur.eat_keyword("not") {
        return Ok(StlFormula::not(parse_unary(cur)?));
    }
    if cur.is_keyword("G") || cur.is_keyword("F") {
        let globally = cur.is_keyword("G");
        cur.advance();
        let interval = parse_interval(cur)?;
        let body = parse_unary(cur)?;
        return Ok(if globally {
            StlFormula::globally(interval, body)
        } else {
            StlFormula::eventually(interval, body)
        });
    }
    if cur.peek_kind() == &TokenKind::LParen {
        // Either a parenthesized formula or a predicate whose left operand
        // starts with a parenthesized term; try the formula first.
        let mark = cur.position();
        cur.advance();
        let formula_error = match parse_formula_tokens(cur) {
            Ok(inner) => match cur.expect(&TokenKind::RParen) {
                Ok(_) => return Ok(inner),
                Err(e) => StlError::Syntax(e),
            },
            Err(e) => e,
        };
        cur.reset(mark);
        // Report whichever reading got further into the input.
        return parse_predicate(cur).map_err(|predicate_error| {
            match (&formula_error, &predicate_error) {
                (StlError::Syntax(f), StlError::Syntax(p)) if p.offset > f.offset => {
                    predicate_error
                }
                _ => formula_error,
            }
        });
    }
    parse_predicate(cur)
}

fn parse_predicate(cur: &mut Cursor<'_>) -> Result<StlFormula, StlError> {
    let left = parse_term(cur)?;
    let op = match cur.peek_kind() {
        TokenKind::Le => CmpOp::Le,
        TokenKind::Lt => CmpOp::Lt,
        TokenKind::Ge => CmpOp::Ge,
        TokenKind::Gt => CmpOp::Gt,
        _ => return Err(cur.unexpected("a comparison operator").into()),
    };
    cur.advance();
    let right = parse_term(cur)?;
    Ok(StlFormula::predicate(left, op, right))
}

pub(crate) fn parse_term(cur: &mut Cursor<'_>) -> Result<Term, SyntaxError> {
    parse_sum(cur, &mut |cur: &mut Cursor<'_>| {
        let (name, offset) = cur.expect_ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(SyntaxError::at(
                cur.source,
                offset,
                format!("`{name}` is a keyword, not a signal name"),
            ));
        }
        Ok(name)
    })
}

fn parse_interval(cur: &mut Cursor<'_>) -> Result<Interval, StlError> {
    cur.expect(&TokenKind::LBracket)?;
    let start = cur.expect_number()?;
    cur.expect(&TokenKind::Comma)?;
    let end = cur.expect_number()?;
    cur.expect(&TokenKind::RBracket)?;
    Interval::new(start, end)
}
