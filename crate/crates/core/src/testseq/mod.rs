//! Parameterized test sequences and their compilation into search artifacts.
//!
//! A test-suite file describes a linear list of input steps, the search
//! parameters injected into them, and the oracle for the test: assessment
//! clauses and/or a requirements table. The parameters span the search
//! space; the oracle compiles to an STL formula whose robustness is the
//! automatic fitness.

mod compile;
mod parse;

use thiserror::Error;

use crate::stl::{StlError, StlFormula};
use crate::syntax::SyntaxError;
use crate::trace::{
    concat, sample_expression, whole_steps, Bindings, SignalExpression, Trace, TraceError, Value,
};

pub use compile::{compile_assessment, compile_table};
pub use parse::parse_testsuite;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TestSeqError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{line}:{column}: undeclared parameter `{name}`")]
    UndeclaredParameter {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("parameter `{0}` is declared twice")]
    DuplicateParameter(String),
    #[error("parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("step {step} does not assign input `{input}`")]
    MissingInputAssignment { step: usize, input: String },
    #[error("step {step} assigns input `{input}` more than once")]
    DuplicateAssignment { step: usize, input: String },
    #[error("step {step} assigns `{input}`, which is not a declared input")]
    UnknownInput { step: usize, input: String },
    #[error("a test sequence needs at least one step")]
    NoSteps,
    #[error("step {step} has invalid duration {duration}")]
    InvalidDuration { step: usize, duration: f64 },
    #[error("step {step} lasts {duration} s, less than one time step of {dt} s")]
    StepTooShort { step: usize, duration: f64, dt: f64 },
    #[error("expected {expected} parameter values, got {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("parameter `{param}` = {value} is outside [{lower}, {upper}]")]
    OutOfBounds {
        param: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("scope error: {0}")]
    Scope(String),
    #[error("test suite has no {0}")]
    MissingOracle(&'static str),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Stl(#[from] StlError),
}

/// A box-bounded search parameter injected into a test sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub nominal: f64,
}

impl SearchParameter {
    pub fn new(
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        nominal: f64,
    ) -> Result<Self, TestSeqError> {
        let name = name.into();
        let finite = lower.is_finite() && upper.is_finite() && nominal.is_finite();
        if !(finite && lower <= nominal && nominal <= upper) {
            return Err(TestSeqError::InvalidParameter {
                name,
                reason: format!(
                    "need lower <= nominal <= upper, got [{lower}, {upper}] nominal {nominal}"
                ),
            });
        }
        Ok(Self {
            name,
            lower,
            upper,
            nominal,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStep {
    pub duration: Value,
    /// One expression per input, in the sequence's input order.
    pub assignments: Vec<SignalExpression>,
}

/// A linear list of input steps with the parameters they reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSequenceSpec {
    inputs: Vec<String>,
    steps: Vec<SequenceStep>,
    parameters: Vec<SearchParameter>,
}

impl TestSequenceSpec {
    /// Validates and builds a sequence: at least one step, every step assigns
    /// every input, every referenced parameter is declared exactly once, and
    /// duration parameters are strictly positive.
    pub fn new(
        inputs: Vec<String>,
        steps: Vec<SequenceStep>,
        parameters: Vec<SearchParameter>,
    ) -> Result<Self, TestSeqError> {
        if steps.is_empty() {
            return Err(TestSeqError::NoSteps);
        }
        for (i, p) in parameters.iter().enumerate() {
            if parameters[..i].iter().any(|q| q.name == p.name) {
                return Err(TestSeqError::DuplicateParameter(p.name.clone()));
            }
        }
        let declared = |name: &str| parameters.iter().find(|p| p.name == name);
        for (k, step) in steps.iter().enumerate() {
            if step.assignments.len() != inputs.len() {
                return Err(TestSeqError::MissingInputAssignment {
                    step: k + 1,
                    input: inputs
                        .get(step.assignments.len())
                        .cloned()
                        .unwrap_or_default(),
                });
            }
            match &step.duration {
                Value::Literal(d) if !(*d > 0.0 && d.is_finite()) => {
                    return Err(TestSeqError::InvalidDuration {
                        step: k + 1,
                        duration: *d,
                    })
                }
                Value::Param(name) => match declared(name) {
                    None => {
                        return Err(TestSeqError::UndeclaredParameter {
                            name: name.clone(),
                            line: 0,
                            column: 0,
                        })
                    }
                    Some(p) if p.lower <= 0.0 => {
                        return Err(TestSeqError::InvalidParameter {
                            name: name.clone(),
                            reason: "used as a step duration, so its lower bound must be positive"
                                .into(),
                        })
                    }
                    Some(_) => {}
                },
                Value::Literal(_) => {}
            }
            for expr in &step.assignments {
                if let Some(missing) = expr.params().find(|n| declared(n).is_none()) {
                    return Err(TestSeqError::UndeclaredParameter {
                        name: missing.to_string(),
                        line: 0,
                        column: 0,
                    });
                }
            }
        }
        Ok(Self {
            inputs,
            steps,
            parameters,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn steps(&self) -> &[SequenceStep] {
        &self.steps
    }

    pub fn parameters(&self) -> &[SearchParameter] {
        &self.parameters
    }

    /// Binds a parameter vector (declaration order) after checking arity and
    /// bounds.
    pub fn bind(&self, values: &[f64]) -> Result<Bindings, TestSeqError> {
        if values.len() != self.parameters.len() {
            return Err(TestSeqError::WrongArity {
                expected: self.parameters.len(),
                found: values.len(),
            });
        }
        let mut bindings = Bindings::with_capacity(values.len());
        for (p, &v) in self.parameters.iter().zip(values) {
            if !p.contains(v) {
                return Err(TestSeqError::OutOfBounds {
                    param: p.name.clone(),
                    value: v,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
            bindings.insert(p.name.clone(), v);
        }
        Ok(bindings)
    }

    /// Step boundaries for a parameter vector. With a time step, durations
    /// are truncated to whole samples so that boundaries fall on the grid.
    pub fn timeline(&self, values: &[f64], dt: Option<f64>) -> Result<Timeline, TestSeqError> {
        let bindings = self.bind(values)?;
        self.timeline_for(&bindings, dt)
    }

    fn timeline_for(&self, bindings: &Bindings, dt: Option<f64>) -> Result<Timeline, TestSeqError> {
        let mut bounds = Vec::with_capacity(self.steps.len());
        let mut samples = Vec::with_capacity(self.steps.len());
        let mut elapsed_steps = 0usize;
        let mut elapsed = 0.0;
        for (k, step) in self.steps.iter().enumerate() {
            let duration = step.duration.resolve(bindings)?;
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(TestSeqError::InvalidDuration {
                    step: k + 1,
                    duration,
                });
            }
            match dt {
                Some(dt) => {
                    let n = whole_steps(duration, dt);
                    if n == 0 {
                        return Err(TestSeqError::StepTooShort {
                            step: k + 1,
                            duration,
                            dt,
                        });
                    }
                    let start = elapsed_steps as f64 * dt;
                    elapsed_steps += n;
                    bounds.push((start, elapsed_steps as f64 * dt));
                    samples.push(n);
                }
                None => {
                    let start = elapsed;
                    elapsed += duration;
                    bounds.push((start, elapsed));
                }
            }
        }
        Ok(Timeline { bounds, samples })
    }

    /// Samples the sequence for a parameter vector into an input trace.
    pub fn instantiate(&self, values: &[f64], dt: f64) -> Result<Trace, TestSeqError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TraceError::NonPositiveDt(dt).into());
        }
        let bindings = self.bind(values)?;
        let timeline = self.timeline_for(&bindings, Some(dt))?;
        let mut pieces = Vec::with_capacity(self.steps.len());
        for (k, step) in self.steps.iter().enumerate() {
            let (start, _) = timeline.bounds[k];
            let window = timeline.samples[k] as f64 * dt;
            let columns = step
                .assignments
                .iter()
                .map(|expr| sample_expression(expr, &bindings, start, window, dt))
                .collect::<Result<Vec<_>, _>>()?;
            pieces.push(Trace::from_columns(
                start,
                dt,
                self.inputs.clone(),
                columns,
            )?);
        }
        Ok(concat(&pieces)?)
    }

    pub fn search_space(&self) -> SearchSpace {
        search_space(self)
    }
}

/// Start and end time of every step of one instantiation.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    bounds: Vec<(f64, f64)>,
    samples: Vec<usize>,
}

impl Timeline {
    pub fn step_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn total(&self) -> f64 {
        self.bounds.last().map_or(0.0, |b| b.1)
    }
}

/// Ordered box domain of the search parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nominal: Vec<f64>,
}

impl SearchSpace {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// Extracts the search space of a sequence in declaration order.
pub fn search_space(spec: &TestSequenceSpec) -> SearchSpace {
    let p = &spec.parameters;
    SearchSpace {
        names: p.iter().map(|p| p.name.clone()).collect(),
        lower: p.iter().map(|p| p.lower).collect(),
        upper: p.iter().map(|p| p.upper).collect(),
        nominal: p.iter().map(|p| p.nominal).collect(),
    }
}

/// Samples a sequence for a parameter vector.
pub fn instantiate(
    spec: &TestSequenceSpec,
    values: &[f64],
    dt: f64,
) -> Result<Trace, TestSeqError> {
    spec.instantiate(values, dt)
}

/// Where an assessment clause applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scope {
    Always,
    /// 1-based step index.
    Step(usize),
    After(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentClause {
    pub scope: Scope,
    pub condition: StlFormula,
}

/// The test oracle: every clause must hold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssessmentSpec {
    pub clauses: Vec<AssessmentClause>,
}

impl AssessmentSpec {
    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub precondition: StlFormula,
    pub postcondition: StlFormula,
}

/// Requirements in precondition/postcondition form, checked at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RequirementsTable {
    rows: Vec<TableRow>,
}

impl RequirementsTable {
    pub fn new(rows: Vec<TableRow>) -> Result<Self, TestSeqError> {
        if rows.is_empty() {
            return Err(TestSeqError::MissingOracle("requirements-table rows"));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }
}

/// Everything a test-suite file declares.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub sequence: TestSequenceSpec,
    pub assessment: AssessmentSpec,
    pub table: Option<RequirementsTable>,
}
