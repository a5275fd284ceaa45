//! Discrete-time space robustness.
//!
//! Each subformula is evaluated only over the sample indices its parent
//! needs, and sliding-window extrema keep `G`/`F` linear in the window count.

use std::collections::VecDeque;

use crate::arith::Arith;
use crate::trace::{Trace, GRID_EPS};

use super::{CmpOp, Interval, Robustness, StlError, StlFormula, Term};

/// Robustness of `phi` at the first sample of `trace`.
pub fn robustness(phi: &StlFormula, trace: &Trace) -> Result<Robustness, StlError> {
    robustness_at(phi, trace, trace.start_time())
}

/// Robustness of `phi` at the sample nearest `at_time` (ties go to the
/// earlier sample).
pub fn robustness_at(
    phi: &StlFormula,
    trace: &Trace,
    at_time: f64,
) -> Result<Robustness, StlError> {
    let index = start_index(phi, trace, at_time)?;
    let values = eval(phi, trace, index, index)?;
    Ok(Robustness(values[0]))
}

/// Maps `at_time` to a sample index and checks that the trace covers the
/// formula's horizon from there.
pub(super) fn start_index(
    phi: &StlFormula,
    trace: &Trace,
    at_time: f64,
) -> Result<usize, StlError> {
    check_signals(phi, trace)?;
    let offset = (at_time - trace.start_time()) / trace.dt();
    if !(offset > -0.5) {
        return Err(StlError::TimeBeforeStart(at_time));
    }
    let index = (offset - 0.5).ceil().max(0.0) as usize;
    let needed = index + horizon_steps(phi, trace.dt())?;
    if needed >= trace.len() {
        return Err(StlError::InsufficientHorizon {
            needed: phi.horizon() + (at_time - trace.start_time()),
            available: trace.duration(),
        });
    }
    Ok(index)
}

fn check_signals(phi: &StlFormula, trace: &Trace) -> Result<(), StlError> {
    match phi
        .signals()
        .into_iter()
        .find(|s| trace.index_of(s).is_none())
    {
        Some(missing) => Err(StlError::UnknownSignal(missing.to_string())),
        None => Ok(()),
    }
}

/// Sample offsets `(ceil(a/dt), floor(b/dt))` covered by an interval.
pub(super) fn window(interval: &Interval, dt: f64) -> Result<(usize, usize), StlError> {
    let lo = interval.start() / dt;
    let hi = interval.end() / dt;
    let first = (lo - GRID_EPS * lo.max(1.0)).ceil().max(0.0) as usize;
    let last = (hi + GRID_EPS * hi.max(1.0)).floor().max(0.0) as usize;
    if first > last {
        return Err(StlError::EmptyWindow {
            start: interval.start(),
            end: interval.end(),
            dt,
        });
    }
    Ok((first, last))
}

/// Horizon in whole samples.
pub(super) fn horizon_steps(phi: &StlFormula, dt: f64) -> Result<usize, StlError> {
    Ok(match phi {
        StlFormula::Predicate { .. } => 0,
        StlFormula::Not(a) => horizon_steps(a, dt)?,
        StlFormula::And(a, b) | StlFormula::Or(a, b) | StlFormula::Implies(a, b) => {
            horizon_steps(a, dt)?.max(horizon_steps(b, dt)?)
        }
        StlFormula::Globally(i, a) | StlFormula::Eventually(i, a) => {
            window(i, dt)?.1 + horizon_steps(a, dt)?
        }
        StlFormula::Until(i, a, b) => {
            window(i, dt)?.1 + horizon_steps(a, dt)?.max(horizon_steps(b, dt)?)
        }
    })
}

/// Robustness at every index in `lo..=hi`.
fn eval(phi: &StlFormula, trace: &Trace, lo: usize, hi: usize) -> Result<Vec<f64>, StlError> {
    match phi {
        StlFormula::Predicate { left, op, right } => {
            let l = eval_term(left, trace, lo, hi)?;
            let r = eval_term(right, trace, lo, hi)?;
            let out: Vec<f64> = l
                .iter()
                .zip(&r)
                .map(|(&l, &r)| match op {
                    CmpOp::Le | CmpOp::Lt => r - l,
                    CmpOp::Ge | CmpOp::Gt => l - r,
                })
                .collect();
            if let Some(k) = out.iter().position(|v| v.is_nan()) {
                return Err(StlError::NotANumber {
                    time: trace.time(lo + k),
                });
            }
            Ok(out)
        }
        StlFormula::Not(a) => Ok(eval(a, trace, lo, hi)?.into_iter().map(|v| -v).collect()),
        StlFormula::And(a, b) => {
            zip_with(eval(a, trace, lo, hi)?, eval(b, trace, lo, hi)?, f64::min)
        }
        StlFormula::Or(a, b) => {
            zip_with(eval(a, trace, lo, hi)?, eval(b, trace, lo, hi)?, f64::max)
        }
        StlFormula::Implies(a, b) => {
            zip_with(eval(a, trace, lo, hi)?, eval(b, trace, lo, hi)?, |x, y| {
                (-x).max(y)
            })
        }
        StlFormula::Globally(i, a) | StlFormula::Eventually(i, a) => {
            let (first, last) = window(i, trace.dt())?;
            let child = eval(a, trace, lo + first, hi + last)?;
            let take_min = matches!(phi, StlFormula::Globally(..));
            Ok(sliding_extreme(&child, last - first + 1, take_min))
        }
        StlFormula::Until(i, a, b) => {
            let (first, last) = window(i, trace.dt())?;
            let left = eval(a, trace, lo, hi + last)?;
            let right = eval(b, trace, lo, hi + last)?;
            let out = (0..=hi - lo)
                .map(|k| {
                    let mut prefix_min = f64::INFINITY;
                    let mut best = f64::NEG_INFINITY;
                    for j in k..=k + last {
                        prefix_min = prefix_min.min(left[j]);
                        if j >= k + first {
                            best = best.max(right[j].min(prefix_min));
                        }
                    }
                    best
                })
                .collect();
            Ok(out)
        }
    }
}

fn zip_with(a: Vec<f64>, b: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>, StlError> {
    Ok(a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect())
}

/// `out[k]` = min (or max) of `values[k..k + width]`, via a monotone deque.
fn sliding_extreme(values: &[f64], width: usize, take_min: bool) -> Vec<f64> {
    if width == 1 {
        return values.to_vec();
    }
    let dominates = |new: f64, old: f64| if take_min { new <= old } else { new >= old };
    let mut out = Vec::with_capacity(values.len() + 1 - width);
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(width);
    for (j, &v) in values.iter().enumerate() {
        while deque.back().is_some_and(|&back| dominates(v, values[back])) {
            deque.pop_back();
        }
        deque.push_back(j);
        if j + 1 >= width {
            let start = j + 1 - width;
            while deque.front().is_some_and(|&front| front < start) {
                deque.pop_front();
            }
            out.push(values[deque[0]]);
        }
    }
    out
}

/// Evaluates an arithmetic term at every index in `lo..=hi`.
pub(super) fn eval_term(
    term: &Term,
    trace: &Trace,
    lo: usize,
    hi: usize,
) -> Result<Vec<f64>, StlError> {
    let len = hi - lo + 1;
    Ok(match term {
        Arith::Const(c) => vec![*c; len],
        Arith::Leaf(name) => {
            let j = trace
                .index_of(name)
                .ok_or_else(|| StlError::UnknownSignal(name.clone()))?;
            (lo..=hi).map(|k| trace.value(k, j)).collect()
        }
        Arith::Neg(e) => eval_term(e, trace, lo, hi)?
            .into_iter()
            .map(|v| -v)
            .collect(),
        Arith::Abs(e) => eval_term(e, trace, lo, hi)?
            .into_iter()
            .map(f64::abs)
            .collect(),
        Arith::Add(a, b) => binary(a, b, trace, lo, hi, |x, y| x + y)?,
        Arith::Sub(a, b) => binary(a, b, trace, lo, hi, |x, y| x - y)?,
        Arith::Mul(a, b) => binary(a, b, trace, lo, hi, |x, y| x * y)?,
        Arith::Div(a, b) => {
            let x = eval_term(a, trace, lo, hi)?;
            let y = eval_term(b, trace, lo, hi)?;
            if let Some(k) = y.iter().position(|&d| d == 0.0) {
                return Err(StlError::DivisionByZero {
                    time: trace.time(lo + k),
                });
            }
            x.into_iter().zip(y).map(|(x, y)| x / y).collect()
        }
    })
}

fn binary(
    a: &Term,
    b: &Term,
    trace: &Trace,
    lo: usize,
    hi: usize,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Vec<f64>, StlError> {
    let x = eval_term(a, trace, lo, hi)?;
    let y = eval_term(b, trace, lo, hi)?;
    Ok(x.into_iter().zip(y).map(|(x, y)| f(x, y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;

    fn speed(values: Vec<f64>) -> Trace {
        Trace::from_columns(0.0, 1.0, vec!["speed".into()], vec![values]).unwrap()
    }

    #[test]
    fn constant_speed_margin() {
        let phi = parse_stl("G[0,10](speed <= 120)").unwrap();
        let r = robustness(&phi, &speed(vec![100.0; 11])).unwrap();
        assert_eq!(r.value(), 20.0);
    }

    #[test]
    fn ramp_violation() {
        let phi = parse_stl("G[0,10](speed <= 120)").unwrap();
        let ramp: Vec<f64> = (0..=10).map(|k| 13.0 * k as f64).collect();
        let r = robustness(&phi, &speed(ramp)).unwrap();
        assert_eq!(r.value(), -10.0);
        assert!(r.is_violated());
    }

    #[test]
    fn strict_and_non_strict_share_values() {
        let t = speed(vec![3.0, 5.0]);
        let a = robustness(&parse_stl("speed < 4").unwrap(), &t).unwrap();
        let b = robustness(&parse_stl("speed <= 4").unwrap(), &t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value(), 1.0);
        let c = robustness(&parse_stl("speed > 4").unwrap(), &t).unwrap();
        assert_eq!(c.value(), -1.0);
    }

    #[test]
    fn nearest_sample_ties_to_earlier() {
        let t = speed(vec![0.0, 1.0, 2.0, 3.0]);
        let phi = parse_stl("speed <= 10").unwrap();
        assert_eq!(robustness_at(&phi, &t, 1.5).unwrap().value(), 9.0);
        assert_eq!(robustness_at(&phi, &t, 1.6).unwrap().value(), 8.0);
        assert_eq!(robustness_at(&phi, &t, 1.4).unwrap().value(), 9.0);
    }

    #[test]
    fn until_semantics() {
        let t = Trace::from_columns(
            0.0,
            1.0,
            vec!["a".into(), "b".into()],
            vec![vec![3.0, 2.0, 1.0, 5.0], vec![-1.0, -2.0, 4.0, 0.0]],
        )
        .unwrap();
        // a > 0 U[0,3] b > 0: best is t' = 2 with min(b=4, min(a[0..=2])=1) = 1.
        let phi = parse_stl("(a > 0) U[0,3] (b > 0)").unwrap();
        assert_eq!(robustness(&phi, &t).unwrap().value(), 1.0);
        // Starting the window at 3 leaves only t' = 3: min(0, min(3,2,1,5)) = 0.
        let phi = parse_stl("(a > 0) U[3,3] (b > 0)").unwrap();
        assert_eq!(robustness(&phi, &t).unwrap().value(), 0.0);
    }

    #[test]
    fn window_mapping_rounds_inward() {
        let i = Interval::new(0.25, 0.75).unwrap();
        assert_eq!(window(&i, 0.5).unwrap(), (1, 1));
        let i = Interval::new(0.3, 0.3).unwrap();
        assert_eq!(window(&i, 0.1).unwrap(), (3, 3));
        let i = Interval::new(0.2, 0.3).unwrap();
        assert!(matches!(window(&i, 1.0), Err(StlError::EmptyWindow { .. })));
    }

    #[test]
    fn errors() {
        let t = speed(vec![1.0; 5]);
        assert_eq!(
            robustness(&parse_stl("G[0,10](speed <= 1)").unwrap(), &t),
            Err(StlError::InsufficientHorizon {
                needed: 10.0,
                available: 4.0
            })
        );
        assert_eq!(
            robustness(&parse_stl("rpm <= 1").unwrap(), &t),
            Err(StlError::UnknownSignal("rpm".into()))
        );
        assert_eq!(
            robustness(&parse_stl("G[0,2](1 / (speed - 1) <= 1)").unwrap(), &t),
            Err(StlError::DivisionByZero { time: 0.0 })
        );
        assert!(matches!(
            robustness_at(&parse_stl("speed <= 1").unwrap(), &t, -3.0),
            Err(StlError::TimeBeforeStart(_))
        ));
    }

    #[test]
    fn sliding_extreme_matches_naive() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        for width in 1..=v.len() {
            let mins = sliding_extreme(&v, width, true);
            let maxs = sliding_extreme(&v, width, false);
            for k in 0..=v.len() - width {
                let w = &v[k..k + width];
                assert_eq!(mins[k], w.iter().copied().fold(f64::INFINITY, f64::min));
                assert_eq!(maxs[k], w.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
}
