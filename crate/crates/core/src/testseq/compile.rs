use crate::stl::{Interval, StlFormula};
use crate::trace::GRID_EPS;

use super::{AssessmentSpec, RequirementsTable, Scope, TestSeqError, Timeline};

/// Compiles assessment clauses into one formula over the candidate's timeline:
/// `always` covers `[0, H]`, `step k` the step's span, `after t` covers
/// `[t, H]`. Clauses are conjoined in order.
pub fn compile_assessment(
    assessment: &AssessmentSpec,
    timeline: &Timeline,
) -> Result<StlFormula, TestSeqError> {
    if assessment.is_empty() {
        return Err(TestSeqError::MissingOracle("assessment clauses"));
    }
    let total = timeline.total();
    let bounds = timeline.step_bounds();
    let mut compiled = Vec::with_capacity(assessment.clauses.len());
    for clause in &assessment.clauses {
        let (start, end) = match clause.scope {
            Scope::Always => (0.0, total),
            Scope::Step(k) => *bounds.get(k.wrapping_sub(1)).ok_or_else(|| {
                TestSeqError::Scope(format!(
                    "step {k} does not exist; the sequence has {} steps",
                    bounds.len()
                ))
            })?,
            Scope::After(t) => {
                if t > total * (1.0 + GRID_EPS) {
                    return Err(TestSeqError::Scope(format!(
                        "`after {t}` lies beyond the test end {total}"
                    )));
                }
                (t.min(total), total)
            }
        };
        let phi = StlFormula::globally(Interval::new(start, end)?, clause.condition.clone());
        check_horizon(&phi, total)?;
        compiled.push(phi);
    }
    Ok(StlFormula::conjunction(compiled).expect("at least one clause"))
}

/// Compiles a requirements table: every row must hold at every sample,
/// `G[0, horizon](pre -> post)`, and rows are conjoined in order.
pub fn compile_table(table: &RequirementsTable, horizon: f64) -> Result<StlFormula, TestSeqError> {
    let interval = Interval::new(0.0, horizon)?;
    let mut compiled = Vec::with_capacity(table.rows().len());
    for row in table.rows() {
        let phi = StlFormula::globally(
            interval,
            StlFormula::implies(row.precondition.clone(), row.postcondition.clone()),
        );
        check_horizon(&phi, horizon)?;
        compiled.push(phi);
    }
    Ok(StlFormula::conjunction(compiled).expect("tables have at least one row"))
}

fn check_horizon(phi: &StlFormula, total: f64) -> Result<(), TestSeqError> {
    let needed = phi.horizon();
    if needed > total * (1.0 + GRID_EPS) + GRID_EPS {
        return Err(TestSeqError::Scope(format!(
            "`{phi}` looks {needed} s ahead but the test lasts {total} s"
        )));
    }
    Ok(())
}
