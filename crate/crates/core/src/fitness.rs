//! Manual (engineer-written) fitness, per-run normalization and the combined
//! fitness that guides the search.
//!
//! The automatic channel is the requirement's robustness. The manual channel
//! is an arithmetic expression over whole-trace functionals such as
//! `1 - mean(throttle)`. Both are min-max normalized against the values seen
//! so far in the run and blended with a weight; the verdict is taken from
//! the raw robustness alone.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{parse_sum, Arith};
use crate::stl::{robustness, StlError, StlFormula};
use crate::syntax::{tokenize, Cursor, SyntaxError};
use crate::trace::Trace;

/// Guards the normalization denominator.
pub const NORMALIZATION_EPS: f64 = 1e-9;

/// Weight of the automatic channel when none is configured.
pub const DEFAULT_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitnessError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("division by zero in manual fitness")]
    DivisionByZero,
    #[error("manual fitness evaluated to a non-finite value ({0})")]
    NonFinite(f64),
    #[error("weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error(transparent)]
    Robustness(#[from] StlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    Min,
    Max,
    Mean,
    AtEnd,
    AtStart,
}

impl Functional {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "min" => Functional::Min,
            "max" => Functional::Max,
            "mean" => Functional::Mean,
            "at_end" => Functional::AtEnd,
            "at_start" => Functional::AtStart,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Functional::Min => "min",
            Functional::Max => "max",
            Functional::Mean => "mean",
            Functional::AtEnd => "at_end",
            Functional::AtStart => "at_start",
        }
    }

    fn apply(self, series: &[f64]) -> f64 {
        match self {
            Functional::Min => series.iter().copied().fold(f64::INFINITY, f64::min),
            Functional::Max => series.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Functional::Mean => series.iter().sum::<f64>() / series.len() as f64,
            Functional::AtEnd => series[series.len() - 1],
            Functional::AtStart => series[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitnessLeaf {
    Over(Functional, String),
    Duration,
}

impl fmt::Display for FitnessLeaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitnessLeaf::Over(func, signal) => write!(f, "{}({signal})", func.name()),
            FitnessLeaf::Duration => f.write_str("duration()"),
        }
    }
}

/// A parsed manual fitness expression. Lower values should point towards
/// inputs the engineer believes are more likely to expose a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ManualFitness {
    expr: Arith<FitnessLeaf>,
}

impl ManualFitness {
    pub fn parse(text: &str) -> Result<Self, FitnessError> {
        let tokens = tokenize(text)?;
        let mut cur = Cursor::new(text, &tokens);
        let expr = parse_sum(&mut cur, &mut parse_leaf)?;
        if !cur.at_eof() {
            return Err(cur.unexpected("end of expression").into());
        }
        Ok(Self { expr })
    }

    pub fn expr(&self) -> &Arith<FitnessLeaf> {
        &self.expr
    }

    /// Signals read by the expression.
    pub fn signals(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.expr.for_each_leaf(&mut |leaf| {
            if let FitnessLeaf::Over(_, s) = leaf {
                if !out.contains(&s.as_str()) {
                    out.push(s);
                }
            }
        });
        out
    }

    pub fn eval(&self, trace: &Trace) -> Result<f64, FitnessError> {
        let v = eval_expr(&self.expr, trace)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FitnessError::NonFinite(v))
        }
    }
}

impl fmt::Display for ManualFitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

fn parse_leaf(cur: &mut Cursor<'_>) -> Result<FitnessLeaf, SyntaxError> {
    use crate::syntax::TokenKind;
    let (name, offset) = cur.expect_ident()?;
    if name == "duration" {
        cur.expect(&TokenKind::LParen)?;
        cur.expect(&TokenKind::RParen)?;
        return Ok(FitnessLeaf::Duration);
    }
    let Some(func) = Functional::from_name(&name) else {
        return Err(SyntaxError::at(
            cur.source,
            offset,
            format!(
                "`{name}` is not a trace functional; use min, max, mean, at_end, at_start or duration"
            ),
        ));
    };
    cur.expect(&TokenKind::LParen)?;
    let (signal, _) = cur.expect_ident()?;
    cur.expect(&TokenKind::RParen)?;
    Ok(FitnessLeaf::Over(func, signal))
}

fn eval_expr(expr: &Arith<FitnessLeaf>, trace: &Trace) -> Result<f64, FitnessError> {
    Ok(match expr {
        Arith::Const(c) => *c,
        Arith::Leaf(FitnessLeaf::Duration) => trace.duration(),
        Arith::Leaf(FitnessLeaf::Over(func, signal)) => {
            let series = trace
                .column_by_name(signal)
                .ok_or_else(|| FitnessError::UnknownSignal(signal.clone()))?;
            func.apply(&series)
        }
        Arith::Neg(e) => -eval_expr(e, trace)?,
        Arith::Abs(e) => eval_expr(e, trace)?.abs(),
        Arith::Add(a, b) => eval_expr(a, trace)? + eval_expr(b, trace)?,
        Arith::Sub(a, b) => eval_expr(a, trace)? - eval_expr(b, trace)?,
        Arith::Mul(a, b) => eval_expr(a, trace)? * eval_expr(b, trace)?,
        Arith::Div(a, b) => {
            let num = eval_expr(a, trace)?;
            let den = eval_expr(b, trace)?;
            if den == 0.0 {
                return Err(FitnessError::DivisionByZero);
            }
            num / den
        }
    })
}

/// Evaluates a manual fitness expression over the whole trace.
pub fn eval_manual(expr: &ManualFitness, trace: &Trace) -> Result<f64, FitnessError> {
    expr.eval(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Automatic,
    Manual,
}

/// Running extremes of one channel's raw values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelStats {
    min: f64,
    max: f64,
    count: usize,
}

impl ChannelStats {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        (self.count > 0).then_some((self.min, self.max))
    }

    fn observe(&mut self, raw: f64) {
        if self.count == 0 {
            self.min = raw;
            self.max = raw;
        } else {
            self.min = self.min.min(raw);
            self.max = self.max.max(raw);
        }
        self.count += 1;
    }

    fn scale(&self, raw: f64) -> f64 {
        if raw == f64::INFINITY {
            return 1.0;
        }
        if raw == f64::NEG_INFINITY {
            return 0.0;
        }
        if self.count <= 1 {
            return 0.5;
        }
        ((raw - self.min) / (self.max - self.min + NORMALIZATION_EPS)).clamp(0.0, 1.0)
    }
}

/// Per-run normalization state for both channels. Never shared between runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizerState {
    automatic: ChannelStats,
    manual: ChannelStats,
}

impl NormalizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self, channel: Channel) -> &ChannelStats {
        match channel {
            Channel::Automatic => &self.automatic,
            Channel::Manual => &self.manual,
        }
    }

    fn stats_mut(&mut self, channel: Channel) -> &mut ChannelStats {
        match channel {
            Channel::Automatic => &mut self.automatic,
            Channel::Manual => &mut self.manual,
        }
    }

    /// Records `raw` and maps it into `[0, 1]` against the updated range.
    /// The first observation of a channel maps to 0.5. Infinite values are
    /// not recorded; they map to the ends of the range.
    pub fn normalize(&mut self, raw: f64, channel: Channel) -> f64 {
        let stats = self.stats_mut(channel);
        if raw.is_finite() {
            stats.observe(raw);
        }
        stats.scale(raw)
    }

    /// Maps `raw` against the current range without recording it.
    pub fn rescale(&self, raw: f64, channel: Channel) -> f64 {
        self.stats(channel).scale(raw)
    }
}

/// Free-function form of [`NormalizerState::normalize`].
pub fn normalize(raw: f64, channel: Channel, state: &mut NormalizerState) -> f64 {
    state.normalize(raw, channel)
}

fn check_weight(weight: f64) -> Result<(), FitnessError> {
    if (0.0..=1.0).contains(&weight) {
        Ok(())
    } else {
        Err(FitnessError::WeightOutOfRange(weight))
    }
}

/// `weight * automatic + (1 - weight) * manual`.
pub fn combine(
    normalized_automatic: f64,
    normalized_manual: f64,
    weight: f64,
) -> Result<f64, FitnessError> {
    check_weight(weight)?;
    Ok(weight * normalized_automatic + (1.0 - weight) * normalized_manual)
}

/// Fitness of one simulated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub raw_automatic: f64,
    pub raw_manual: f64,
    pub normalized_automatic: f64,
    pub normalized_manual: f64,
    pub combined: f64,
    pub weight_used: f64,
    pub falsified: bool,
}

impl FitnessReport {
    /// Report for a candidate whose simulation could not be completed: worst
    /// value on both channels, never a falsification.
    pub fn worst_case(weight: f64) -> Self {
        Self {
            raw_automatic: f64::NAN,
            raw_manual: f64::NAN,
            normalized_automatic: 1.0,
            normalized_manual: 1.0,
            combined: 1.0,
            weight_used: weight,
            falsified: false,
        }
    }
}

/// Scores a simulated trace. Without a manual expression the weight is
/// forced to 1 and the manual channel records 0.
pub fn assess(
    trace: &Trace,
    requirement: &StlFormula,
    manual: Option<&ManualFitness>,
    weight: f64,
    state: &mut NormalizerState,
) -> Result<FitnessReport, FitnessError> {
    let weight = if manual.is_some() { weight } else { 1.0 };
    check_weight(weight)?;
    let raw_automatic = robustness(requirement, trace)?.value();
    let raw_manual = match manual {
        Some(m) => m.eval(trace)?,
        None => 0.0,
    };
    let normalized_automatic = state.normalize(raw_automatic, Channel::Automatic);
    let normalized_manual = state.normalize(raw_manual, Channel::Manual);
    let combined = combine(normalized_automatic, normalized_manual, weight)?;
    Ok(FitnessReport {
        raw_automatic,
        raw_manual,
        normalized_automatic,
        normalized_manual,
        combined,
        weight_used: weight,
        falsified: raw_automatic < 0.0,
    })
}
