//! Signal temporal logic: syntax tree, parser, quantitative (robustness) and
//! boolean semantics over uniformly sampled traces.

mod boolean;
mod parse;
mod robustness;

use std::fmt;

use thiserror::Error;

use crate::arith::Arith;
use crate::syntax::SyntaxError;

pub use boolean::{evaluate_bool, evaluate_bool_at};
pub use parse::{parse_formula_tokens, parse_stl};
pub use robustness::{robustness, robustness_at};

/// Arithmetic over signal samples; leaves are signal names.
pub type Term = Arith<String>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StlError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("invalid interval [{start}, {end}]: need 0 <= start <= end")]
    Interval { start: f64, end: f64 },
    #[error("formula needs {needed} s of trace but only {available} s are available")]
    InsufficientHorizon { needed: f64, available: f64 },
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("division by zero at t = {time}")]
    DivisionByZero { time: f64 },
    #[error("predicate is not a number at t = {time}")]
    NotANumber { time: f64 },
    #[error("interval [{start}, {end}] contains no sample at dt = {dt}")]
    EmptyWindow { start: f64, end: f64, dt: f64 },
    #[error("evaluation time {0} lies before the start of the trace")]
    TimeBeforeStart(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        })
    }
}

/// Closed time interval `[start, end]` in seconds, relative to the
/// evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    start: f64,
    end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self, StlError> {
        if start.is_finite() && end.is_finite() && 0.0 <= start && start <= end {
            Ok(Self { start, end })
        } else {
            Err(StlError::Interval { start, end })
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StlFormula {
    Predicate { left: Term, op: CmpOp, right: Term },
    Not(Box<StlFormula>),
    And(Box<StlFormula>, Box<StlFormula>),
    Or(Box<StlFormula>, Box<StlFormula>),
    Implies(Box<StlFormula>, Box<StlFormula>),
    Globally(Interval, Box<StlFormula>),
    Eventually(Interval, Box<StlFormula>),
    Until(Interval, Box<StlFormula>, Box<StlFormula>),
}

impl StlFormula {
    pub fn predicate(left: Term, op: CmpOp, right: Term) -> Self {
        StlFormula::Predicate { left, op, right }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(phi: StlFormula) -> Self {
        StlFormula::Not(Box::new(phi))
    }

    pub fn and(phi: StlFormula, psi: StlFormula) -> Self {
        StlFormula::And(Box::new(phi), Box::new(psi))
    }

    pub fn or(phi: StlFormula, psi: StlFormula) -> Self {
        StlFormula::Or(Box::new(phi), Box::new(psi))
    }

    pub fn implies(phi: StlFormula, psi: StlFormula) -> Self {
        StlFormula::Implies(Box::new(phi), Box::new(psi))
    }

    pub fn globally(interval: Interval, phi: StlFormula) -> Self {
        StlFormula::Globally(interval, Box::new(phi))
    }

    pub fn eventually(interval: Interval, phi: StlFormula) -> Self {
        StlFormula::Eventually(interval, Box::new(phi))
    }

    pub fn until(interval: Interval, phi: StlFormula, psi: StlFormula) -> Self {
        StlFormula::Until(interval, Box::new(phi), Box::new(psi))
    }

    /// Conjunction of all `parts`, folded to the left. `None` if empty.
    pub fn conjunction(parts: impl IntoIterator<Item = StlFormula>) -> Option<Self> {
        parts.into_iter().reduce(StlFormula::and)
    }

    /// Trace duration needed past the evaluation time.
    pub fn horizon(&self) -> f64 {
        match self {
            StlFormula::Predicate { .. } => 0.0,
            StlFormula::Not(phi) => phi.horizon(),
            StlFormula::And(a, b) | StlFormula::Or(a, b) | StlFormula::Implies(a, b) => {
                a.horizon().max(b.horizon())
            }
            StlFormula::Globally(i, phi) | StlFormula::Eventually(i, phi) => i.end + phi.horizon(),
            StlFormula::Until(i, a, b) => i.end + a.horizon().max(b.horizon()),
        }
    }

    /// Signal names referenced by predicates, in first-occurrence order.
    pub fn signals(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.collect_signals(&mut out);
        out
    }

    fn collect_signals<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            StlFormula::Predicate { left, right, .. } => {
                let mut push = |name: &'a String| {
                    if !out.contains(&name.as_str()) {
                        out.push(name);
                    }
                };
                left.for_each_leaf(&mut push);
                right.for_each_leaf(&mut push);
            }
            StlFormula::Not(phi)
            | StlFormula::Globally(_, phi)
            | StlFormula::Eventually(_, phi) => phi.collect_signals(out),
            StlFormula::And(a, b)
            | StlFormula::Or(a, b)
            | StlFormula::Implies(a, b)
            | StlFormula::Until(_, a, b) => {
                a.collect_signals(out);
                b.collect_signals(out);
            }
        }
    }
}

/// Horizon of `phi`.
pub fn horizon(phi: &StlFormula) -> f64 {
    phi.horizon()
}

/// Prints in the concrete syntax accepted by [`parse_stl`]; compound
/// subterms are fully parenthesized so printing then parsing is lossless.
impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StlFormula::Predicate { left, op, right } => write!(f, "{left} {op} {right}"),
            StlFormula::Not(phi) => write!(f, "not ({phi})"),
            StlFormula::And(a, b) => write!(f, "({a} and {b})"),
            StlFormula::Or(a, b) => write!(f, "({a} or {b})"),
            StlFormula::Implies(a, b) => write!(f, "({a} -> {b})"),
            StlFormula::Globally(i, phi) => write!(f, "G[{}, {}]({phi})", i.start, i.end),
            StlFormula::Eventually(i, phi) => write!(f, "F[{}, {}]({phi})", i.start, i.end),
            StlFormula::Until(i, a, b) => write!(f, "({a}) U[{}, {}] ({b})", i.start, i.end),
        }
    }
}

/// Quantitative satisfaction of a formula. Positive means satisfied,
/// negative violated, zero is inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Robustness(pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Robustness {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn verdict(self) -> Verdict {
        if self.0 > 0.0 {
            Verdict::Satisfied
        } else if self.0 < 0.0 {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn is_violated(self) -> bool {
        self.0 < 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_examples() {
        assert_eq!(parse_stl("x <= 1").unwrap().horizon(), 0.0);
        assert_eq!(parse_stl("G[0,10](x <= 1)").unwrap().horizon(), 10.0);
        assert_eq!(
            parse_stl("G[0,10](F[0,5](x <= 1))").unwrap().horizon(),
            15.0
        );
        assert_eq!(
            parse_stl("(x <= 1) U[1,4] (G[0,2](y > 0))")
                .unwrap()
                .horizon(),
            6.0
        );
        assert_eq!(
            parse_stl("G[0,3](x<1) and F[2,7](y>0)").unwrap().horizon(),
            7.0
        );
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::new(0.0, 0.0).is_ok());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(-1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn signals_in_order() {
        let phi = parse_stl("G[0,1](b + a <= 1 and F[0,1](c > a))").unwrap();
        assert_eq!(phi.signals(), vec!["b", "a", "c"]);
    }

    #[test]
    fn verdicts() {
        assert_eq!(Robustness(1.0).verdict(), Verdict::Satisfied);
        assert_eq!(Robustness(-1.0).verdict(), Verdict::Violated);
        assert_eq!(Robustness(0.0).verdict(), Verdict::Inconclusive);
    }
}
