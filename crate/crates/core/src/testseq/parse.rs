use crate::stl::{parse_formula_tokens, StlError, StlFormula};
use crate::syntax::{tokenize, Cursor, SyntaxError, TokenKind};
use crate::trace::{SignalExpression, Value};

use super::{
    AssessmentClause, AssessmentSpec, RequirementsTable, Scope, SearchParameter, SequenceStep,
    TableRow, TestSeqError, TestSequenceSpec, TestSuite,
};

const ITEM_KEYWORDS: &[&str] = &["inputs", "param", "step", "assess", "table"];

/// Parses a test-suite file.
///
/// ```text
/// suite   := item*
/// item    := 'inputs' ident (',' ident)* ';'
///          | 'param' ident 'in' '[' number ',' number ']' 'nominal' number ';'
///          | 'step' value '{' (ident '=' signal ';')* '}'
///          | 'assess' scope ':' formula ';'
///          | 'table' '{' ('row' ':' formula '=>' formula ';')* '}'
/// scope   := 'always' | 'step' integer | 'after' number
/// signal  := value
///          | 'Constant' '(' value ')'
///          | 'Ramp' '(' value ',' value ')'
///          | 'Step' '(' value ',' value ',' value ')'
///          | 'Sine' '(' value ',' value ',' value ',' value ')'
/// value   := '-'? number | ident
/// ```
///
/// `Step(before, after, fraction)` switches after `fraction` of the step;
/// `Sine(offset, amplitude, period, phase)` uses absolute time. Without an
/// `inputs` line the inputs are the assigned names in order of appearance.
pub fn parse_testsuite(text: &str) -> Result<TestSuite, TestSeqError> {
    let tokens = tokenize(text)?;
    let mut cur = Cursor::new(text, &tokens);
    let mut p = SuiteParser::default();
    while !cur.at_eof() {
        p.item(&mut cur)?;
    }
    p.finish(text)
}

struct RawStep {
    duration: Value,
    assignments: Vec<(String, SignalExpression)>,
}

#[derive(Default)]
struct SuiteParser {
    declared_inputs: Option<Vec<String>>,
    parameters: Vec<SearchParameter>,
    steps: Vec<RawStep>,
    /// Clauses with their source offsets; step scopes are checked once all steps are known.
    clauses: Vec<(AssessmentClause, usize)>,
    rows: Vec<TableRow>,
    saw_table: bool,
    /// Every parameter reference, for the declared-before-use check.
    references: Vec<(String, usize)>,
}

impl SuiteParser {
    fn item(&mut self, cur: &mut Cursor<'_>) -> Result<(), TestSeqError> {
        let (word, offset) = cur.expect_ident()?;
        match word.as_str() {
            "inputs" => self.inputs(cur, offset),
            "param" => self.param(cur),
            "step" => self.step(cur),
            "assess" => self.assess(cur),
            "table" => self.table(cur),
            _ => Err(SyntaxError::at(
                cur.source,
                offset,
                format!(
                    "expected one of {}, found `{word}`",
                    ITEM_KEYWORDS.join(", ")
                ),
            )
            .into()),
        }
    }

    fn inputs(&mut self, cur: &mut Cursor<'_>, offset: usize) -> Result<(), TestSeqError> {
        if self.declared_inputs.is_some() {
            return Err(SyntaxError::at(cur.source, offset, "inputs are declared twice").into());
        }
        let mut names = Vec::new();
        loop {
            let (name, at) = cur.expect_ident()?;
            if names.contains(&name) {
                return Err(SyntaxError::at(
                    cur.source,
                    at,
                    format!("input `{name}` is listed twice"),
                )
                .into());
            }
            names.push(name);
            if !cur.eat(&TokenKind::Comma) {
                break;
            }
        }
        cur.expect(&TokenKind::Semicolon)?;
        self.declared_inputs = Some(names);
        Ok(())
    }

    fn param(&mut self, cur: &mut Cursor<'_>) -> Result<(), TestSeqError> {
        let (name, _) = cur.expect_ident()?;
        cur.expect_keyword("in")?;
        cur.expect(&TokenKind::LBracket)?;
        let lower = cur.expect_number()?;
        cur.expect(&TokenKind::Comma)?;
        let upper = cur.expect_number()?;
        cur.expect(&TokenKind::RBracket)?;
        cur.expect_keyword("nominal")?;
        let nominal = cur.expect_number()?;
        cur.expect(&TokenKind::Semicolon)?;
        if self.parameters.iter().any(|p| p.name == name) {
            return Err(TestSeqError::DuplicateParameter(name));
        }
        self.parameters
            .push(SearchParameter::new(name, lower, upper, nominal)?);
        Ok(())
    }

    fn step(&mut self, cur: &mut Cursor<'_>) -> Result<(), TestSeqError> {
        let duration = self.value(cur)?;
        cur.expect(&TokenKind::LBrace)?;
        let mut assignments: Vec<(String, SignalExpression)> = Vec::new();
        while !cur.eat(&TokenKind::RBrace) {
            let (input, _) = cur.expect_ident()?;
            cur.expect(&TokenKind::Assign)?;
            let expr = self.signal(cur)?;
            cur.expect(&TokenKind::Semicolon)?;
            if assignments.iter().any(|(n, _)| *n == input) {
                return Err(TestSeqError::DuplicateAssignment {
                    step: self.steps.len() + 1,
                    input,
                });
            }
            assignments.push((input, expr));
        }
        self.steps.push(RawStep {
            duration,
            assignments,
        });
        Ok(())
    }

    fn signal(&mut self, cur: &mut Cursor<'_>) -> Result<SignalExpression, TestSeqError> {
        let arity = match cur.peek_kind() {
            TokenKind::Ident(name) if cur.peek_nth(1) == &TokenKind::LParen => {
                match name.as_str() {
                    "Constant" => 1,
                    "Ramp" => 2,
                    "Step" => 3,
                    "Sine" => 4,
                    other => {
                        return Err(cur
                            .error_here(format!(
                            "unknown signal shape `{other}`; expected Constant, Ramp, Step or Sine"
                        ))
                            .into())
                    }
                }
            }
            _ => return Ok(SignalExpression::Constant(self.value(cur)?)),
        };
        cur.advance();
        cur.expect(&TokenKind::LParen)?;
        let mut args = Vec::with_capacity(arity);
        for k in 0..arity {
            if k > 0 {
                cur.expect(&TokenKind::Comma)?;
            }
            args.push(self.value(cur)?);
        }
        cur.expect(&TokenKind::RParen)?;
        let mut args = args.into_iter();
        let mut next = || args.next().expect("arity checked above");
        Ok(match arity {
            1 => SignalExpression::Constant(next()),
            2 => SignalExpression::Ramp {
                from: next(),
                to: next(),
            },
            3 => SignalExpression::Step {
                before: next(),
                after: next(),
                switch_fraction: next(),
            },
            _ => SignalExpression::Sine {
                offset: next(),
                amplitude: next(),
                period: next(),
                phase: next(),
            },
        })
    }

    fn value(&mut self, cur: &mut Cursor<'_>) -> Result<Value, TestSeqError> {
        if let TokenKind::Ident(name) = cur.peek_kind() {
            let offset = cur.advance().offset;
            self.references.push((name.clone(), offset));
            return Ok(Value::Param(name.clone()));
        }
        Ok(Value::Literal(cur.expect_number()?))
    }

    fn assess(&mut self, cur: &mut Cursor<'_>) -> Result<(), TestSeqError> {
        let offset = cur.peek().offset;
        let scope = if cur.eat_keyword("always") {
            Scope::Always
        } else if cur.eat_keyword("step") {
            let k = cur.expect_number()?;
            if !(k >= 1.0 && k.fract() == 0.0 && k <= usize::MAX as f64) {
                return Err(SyntaxError::at(
                    cur.source,
                    offset,
                    "step scopes take a 1-based step number",
                )
                .into());
            }
            Scope::Step(k as usize)
        } else if cur.eat_keyword("after") {
            let t = cur.expect_number()?;
            if t < 0.0 {
                return Err(SyntaxError::at(
                    cur.source,
                    offset,
                    "`after` needs a non-negative time",
                )
                .into());
            }
            Scope::After(t)
        } else {
            return Err(cur.unexpected("`always`, `step` or `after`").into());
        };
        cur.expect(&TokenKind::Colon)?;
        let condition = formula(cur)?;
        cur.expect(&TokenKind::Semicolon)?;
        self.clauses
            .push((AssessmentClause { scope, condition }, offset));
        Ok(())
    }

    fn table(&mut self, cur: &mut Cursor<'_>) -> Result<(), TestSeqError> {
        self.saw_table = true;
        cur.expect(&TokenKind::LBrace)?;
        while !cur.eat(&TokenKind::RBrace) {
            cur.expect_keyword("row")?;
            cur.expect(&TokenKind::Colon)?;
            let precondition = formula(cur)?;
            cur.expect(&TokenKind::FatArrow)?;
            let postcondition = formula(cur)?;
            cur.expect(&TokenKind::Semicolon)?;
            self.rows.push(TableRow {
                precondition,
                postcondition,
            });
        }
        Ok(())
    }

    fn finish(self, source: &str) -> Result<TestSuite, TestSeqError> {
        for (name, offset) in &self.references {
            if !self.parameters.iter().any(|p| p.name == *name) {
                let at = SyntaxError::at(source, *offset, "");
                return Err(TestSeqError::UndeclaredParameter {
                    name: name.clone(),
                    line: at.line,
                    column: at.column,
                });
            }
        }
        if self.steps.is_empty() {
            return Err(TestSeqError::NoSteps);
        }
        let inputs = match self.declared_inputs {
            Some(inputs) => inputs,
            None => {
                let mut inputs: Vec<String> = Vec::new();
                for step in &self.steps {
                    for (name, _) in &step.assignments {
                        if !inputs.contains(name) {
                            inputs.push(name.clone());
                        }
                    }
                }
                inputs
            }
        };
        let mut steps = Vec::with_capacity(self.steps.len());
        for (k, raw) in self.steps.into_iter().enumerate() {
            let mut slots: Vec<Option<SignalExpression>> = vec![None; inputs.len()];
            for (name, expr) in raw.assignments {
                match inputs.iter().position(|n| *n == name) {
                    Some(i) => slots[i] = Some(expr),
                    None => {
                        return Err(TestSeqError::UnknownInput {
                            step: k + 1,
                            input: name,
                        })
                    }
                }
            }
            let mut assignments = Vec::with_capacity(inputs.len());
            for (i, slot) in slots.into_iter().enumerate() {
                match slot {
                    Some(expr) => assignments.push(expr),
                    None => {
                        return Err(TestSeqError::MissingInputAssignment {
                            step: k + 1,
                            input: inputs[i].clone(),
                        })
                    }
                }
            }
            steps.push(SequenceStep {
                duration: raw.duration,
                assignments,
            });
        }
        let step_count = steps.len();
        let sequence = TestSequenceSpec::new(inputs, steps, self.parameters)?;
        let mut clauses = Vec::with_capacity(self.clauses.len());
        for (clause, offset) in self.clauses {
            if let Scope::Step(k) = clause.scope {
                if k > step_count {
                    let at = SyntaxError::at(source, offset, "");
                    return Err(TestSeqError::Scope(format!(
                        "{}:{}: step {k} does not exist; the sequence has {step_count} steps",
                        at.line, at.column
                    )));
                }
            }
            clauses.push(clause);
        }
        let table = if self.saw_table {
            Some(RequirementsTable::new(self.rows)?)
        } else {
            None
        };
        Ok(TestSuite {
            sequence,
            assessment: AssessmentSpec { clauses },
            table,
        })
    }
}

fn formula(cur: &mut Cursor<'_>) -> Result<StlFormula, TestSeqError> {
    parse_formula_tokens(cur).map_err(|e| match e {
        StlError::Syntax(e) => TestSeqError::Syntax(e),
        other => TestSeqError::Stl(other),
    })
}
