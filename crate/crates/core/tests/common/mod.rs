//! Brute-force reference semantics and random generators shared by the
//! integration tests. Nothing here calls the evaluators under test.

#![allow(dead_code)]

use falsify_core::arith::Arith;
use falsify_core::stl::{CmpOp, Interval, StlFormula, Term};
use falsify_core::Trace;
use rand::Rng;

pub const SIGNALS: [&str; 3] = ["x", "y", "z"];

/// Sample indices `j >= i` with `(j - i) dt` inside `[a, b]`, or `None` when
/// the window runs past the end of the trace.
fn window(interval: &Interval, trace: &Trace, i: usize) -> Option<Vec<usize>> {
    let dt = trace.dt();
    let slack = |v: f64| 1e-9 * v.abs().max(1.0);
    let mut out = Vec::new();
    let mut j = i;
    loop {
        let offset = (j - i) as f64 * dt;
        if offset > interval.end() + slack(interval.end()) {
            return Some(out);
        }
        if j >= trace.len() {
            return None;
        }
        if offset >= interval.start() - slack(interval.start()) {
            out.push(j);
        }
        j += 1;
    }
}

fn term(t: &Term, trace: &Trace, j: usize) -> Option<f64> {
    Some(match t {
        Arith::Const(c) => *c,
        Arith::Leaf(name) => trace.value(j, trace.index_of(name)?),
        Arith::Neg(e) => -term(e, trace, j)?,
        Arith::Abs(e) => term(e, trace, j)?.abs(),
        Arith::Add(a, b) => term(a, trace, j)? + term(b, trace, j)?,
        Arith::Sub(a, b) => term(a, trace, j)? - term(b, trace, j)?,
        Arith::Mul(a, b) => term(a, trace, j)? * term(b, trace, j)?,
        Arith::Div(a, b) => {
            let d = term(b, trace, j)?;
            if d == 0.0 {
                return None;
            }
            term(a, trace, j)? / d
        }
    })
}

/// Robustness at sample `i` straight from the definitions; `None` where the
/// production evaluator must report an error.
pub fn robustness(phi: &StlFormula, trace: &Trace, i: usize) -> Option<f64> {
    Some(match phi {
        StlFormula::Predicate { left, op, right } => {
            let (l, r) = (term(left, trace, i)?, term(right, trace, i)?);
            let v = match op {
                CmpOp::Le | CmpOp::Lt => r - l,
                CmpOp::Ge | CmpOp::Gt => l - r,
            };
            if v.is_nan() {
                return None;
            }
            v
        }
        StlFormula::Not(a) => -robustness(a, trace, i)?,
        StlFormula::And(a, b) => robustness(a, trace, i)?.min(robustness(b, trace, i)?),
        StlFormula::Or(a, b) => robustness(a, trace, i)?.max(robustness(b, trace, i)?),
        StlFormula::Implies(a, b) => (-robustness(a, trace, i)?).max(robustness(b, trace, i)?),
        StlFormula::Globally(iv, a) => {
            let js = window(iv, trace, i)?;
            if js.is_empty() {
                return None;
            }
            let mut acc = f64::INFINITY;
            for j in js {
                acc = acc.min(robustness(a, trace, j)?);
            }
            acc
        }
        StlFormula::Eventually(iv, a) => {
            let js = window(iv, trace, i)?;
            if js.is_empty() {
                return None;
            }
            let mut acc = f64::NEG_INFINITY;
            for j in js {
                acc = acc.max(robustness(a, trace, j)?);
            }
            acc
        }
        StlFormula::Until(iv, a, b) => {
            let js = window(iv, trace, i)?;
            if js.is_empty() {
                return None;
            }
            let mut acc = f64::NEG_INFINITY;
            for j in js {
                let mut left = f64::INFINITY;
                for k in i..=j {
                    left = left.min(robustness(a, trace, k)?);
                }
                acc = acc.max(robustness(b, trace, j)?.min(left));
            }
            acc
        }
    })
}

/// Whole-step lookahead of a formula on a grid.
pub fn horizon_steps(phi: &StlFormula, dt: f64) -> usize {
    let steps = |iv: &Interval| (iv.end() / dt + 1e-9).floor() as usize;
    match phi {
        StlFormula::Predicate { .. } => 0,
        StlFormula::Not(a) => horizon_steps(a, dt),
        StlFormula::And(a, b) | StlFormula::Or(a, b) | StlFormula::Implies(a, b) => {
            horizon_steps(a, dt).max(horizon_steps(b, dt))
        }
        StlFormula::Globally(iv, a) | StlFormula::Eventually(iv, a) => {
            steps(iv) + horizon_steps(a, dt)
        }
        StlFormula::Until(iv, a, b) => steps(iv) + horizon_steps(a, dt).max(horizon_steps(b, dt)),
    }
}

pub fn random_term<R: Rng>(rng: &mut R, depth: usize) -> Term {
    if depth == 0 || rng.random_bool(0.4) {
        return if rng.random_bool(0.7) {
            Arith::Leaf(SIGNALS[rng.random_range(0..SIGNALS.len())].to_string())
        } else {
            Arith::Const(random_value(rng))
        };
    }
    let sub = |rng: &mut R| Box::new(random_term(rng, depth - 1));
    match rng.random_range(0..6) {
        0 => Arith::Neg(sub(rng)),
        1 => Arith::Abs(sub(rng)),
        2 => Arith::Add(sub(rng), sub(rng)),
        3 => Arith::Sub(sub(rng), sub(rng)),
        4 => Arith::Mul(sub(rng), sub(rng)),
        // Division only by non-zero literals keeps every formula defined.
        _ => Arith::Div(
            sub(rng),
            Box::new(Arith::Const([2.0, -0.5, 3.0, 0.25][rng.random_range(0..4)])),
        ),
    }
}

/// Small integers (to provoke ties and exact zeros) or arbitrary reals.
pub fn random_value<R: Rng>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        rng.random_range(-3..=3) as f64
    } else {
        rng.random_range(-5.0..5.0)
    }
}

/// Intervals on half-step multiples, so some windows hold no sample.
pub fn random_interval<R: Rng>(rng: &mut R, dt: f64) -> Interval {
    let a = rng.random_range(0..=6) as f64 * dt / 2.0;
    let b = a + rng.random_range(0..=6) as f64 * dt / 2.0;
    Interval::new(a, b).expect("ordered, non-negative")
}

/// Formula with at most `depth` operator levels above its predicates.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, dt: f64) -> StlFormula {
    if depth == 0 || rng.random_bool(0.2) {
        let op = [CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt][rng.random_range(0..4)];
        return StlFormula::predicate(random_term(rng, 2), op, random_term(rng, 2));
    }
    let sub = |rng: &mut R| random_formula(rng, depth - 1, dt);
    match rng.random_range(0..8) {
        0 => StlFormula::not(sub(rng)),
        1 => StlFormula::and(sub(rng), sub(rng)),
        2 => StlFormula::or(sub(rng), sub(rng)),
        3 => StlFormula::implies(sub(rng), sub(rng)),
        4 => StlFormula::globally(random_interval(rng, dt), sub(rng)),
        5 => StlFormula::eventually(random_interval(rng, dt), sub(rng)),
        _ => StlFormula::until(random_interval(rng, dt), sub(rng), sub(rng)),
    }
}

pub fn random_trace<R: Rng>(rng: &mut R, names: &[&str], samples: usize, dt: f64) -> Trace {
    let columns = names
        .iter()
        .map(|_| (0..samples).map(|_| random_value(rng)).collect())
        .collect();
    Trace::from_columns(
        0.0,
        dt,
        names.iter().map(|s| s.to_string()).collect(),
        columns,
    )
    .unwrap()
}

/// Operator names occurring in a formula, for coverage accounting.
pub fn operators(phi: &StlFormula, out: &mut Vec<&'static str>) {
    let name = match phi {
        StlFormula::Predicate { .. } => "predicate",
        StlFormula::Not(_) => "not",
        StlFormula::And(..) => "and",
        StlFormula::Or(..) => "or",
        StlFormula::Implies(..) => "implies",
        StlFormula::Globally(..) => "G",
        StlFormula::Eventually(..) => "F",
        StlFormula::Until(..) => "U",
    };
    out.push(name);
    match phi {
        StlFormula::Predicate { .. } => {}
        StlFormula::Not(a) | StlFormula::Globally(_, a) | StlFormula::Eventually(_, a) => {
            operators(a, out)
        }
        StlFormula::And(a, b)
        | StlFormula::Or(a, b)
        | StlFormula::Implies(a, b)
        | StlFormula::Until(_, a, b) => {
            operators(a, out);
            operators(b, out);
        }
    }
}

/// Equality that treats `0.0` and `-0.0` alike but is otherwise bit-exact.
pub fn same(a: f64, b: f64) -> bool {
    a == b || a.to_bits() == b.to_bits()
}
