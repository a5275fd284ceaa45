//! Boolean semantics on the same sampling grid as robustness. Strict and
//! non-strict comparisons differ here.

use crate::trace::Trace;

use super::robustness::{eval_term, start_index, window};
use super::{CmpOp, StlError, StlFormula};

/// Whether `trace` satisfies `phi` at its first sample.
pub fn evaluate_bool(phi: &StlFormula, trace: &Trace) -> Result<bool, StlError> {
    evaluate_bool_at(phi, trace, trace.start_time())
}

pub fn evaluate_bool_at(phi: &StlFormula, trace: &Trace, at_time: f64) -> Result<bool, StlError> {
    let index = start_index(phi, trace, at_time)?;
    Ok(eval(phi, trace, index, index)?[0])
}

fn eval(phi: &StlFormula, trace: &Trace, lo: usize, hi: usize) -> Result<Vec<bool>, StlError> {
    match phi {
        StlFormula::Predicate { left, op, right } => {
            let l = eval_term(left, trace, lo, hi)?;
            let r = eval_term(right, trace, lo, hi)?;
            if let Some(k) = l
                .iter()
                .zip(&r)
                .position(|(l, r)| l.is_nan() || r.is_nan() || (r - l).is_nan())
            {
                return Err(StlError::NotANumber {
                    time: trace.time(lo + k),
                });
            }
            Ok(l.iter()
                .zip(&r)
                .map(|(&l, &r)| match op {
                    CmpOp::Le => l <= r,
                    CmpOp::Lt => l < r,
                    CmpOp::Ge => l >= r,
                    CmpOp::Gt => l > r,
                })
                .collect())
        }
        StlFormula::Not(a) => Ok(eval(a, trace, lo, hi)?.into_iter().map(|v| !v).collect()),
        StlFormula::And(a, b) => zip(eval(a, trace, lo, hi)?, eval(b, trace, lo, hi)?, |x, y| {
            x && y
        }),
        StlFormula::Or(a, b) => zip(eval(a, trace, lo, hi)?, eval(b, trace, lo, hi)?, |x, y| {
            x || y
        }),
        StlFormula::Implies(a, b) => {
            zip(eval(a, trace, lo, hi)?, eval(b, trace, lo, hi)?, |x, y| {
                !x || y
            })
        }
        StlFormula::Globally(i, a) | StlFormula::Eventually(i, a) => {
            let (first, last) = window(i, trace.dt())?;
            let child = eval(a, trace, lo + first, hi + last)?;
            let counts = prefix_counts(&child);
            let width = last - first + 1;
            let globally = matches!(phi, StlFormula::Globally(..));
            Ok((0..=hi - lo)
                .map(|k| {
                    let hits = counts[k + width] - counts[k];
                    if globally {
                        hits == width
                    } else {
                        hits > 0
                    }
                })
                .collect())
        }
        StlFormula::Until(i, a, b) => {
            let (first, last) = window(i, trace.dt())?;
            let left = eval(a, trace, lo, hi + last)?;
            let right = eval(b, trace, lo, hi + last)?;
            // next_false[j]: first index >= j where the left operand fails.
            let mut next_false = vec![left.len(); left.len() + 1];
            for j in (0..left.len()).rev() {
                next_false[j] = if left[j] { next_false[j + 1] } else { j };
            }
            let counts = prefix_counts(&right);
            Ok((0..=hi - lo)
                .map(|k| {
                    let from = k + first;
                    // t' must keep the left operand true on [k, t'].
                    let Some(until) = next_false[k].checked_sub(1) else {
                        return false;
                    };
                    let to = (k + last).min(until);
                    from <= to && counts[to + 1] > counts[from]
                })
                .collect())
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Result<Vec<bool>, StlError> {
    Ok(a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect())
}

fn prefix_counts(values: &[bool]) -> Vec<usize> {
    let mut counts = Vec::with_capacity(values.len() + 1);
    counts.push(0);
    let mut total = 0;
    for &v in values {
        total += usize::from(v);
        counts.push(total);
    }
    counts
}
