//! Uniformly sampled multivariate signals, symbolic input-signal expressions
//! and the CSV trace format.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Relative slack used when mapping times onto the sampling grid, so that
/// e.g. `0.3 / 0.1` counts as three whole steps.
pub const GRID_EPS: f64 = 1e-9;

/// Name-to-value map for search parameters.
pub type Bindings = HashMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("a trace needs at least one sample")]
    Empty,
    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate signal name `{0}`")]
    DuplicateSignal(String),
    #[error("non-finite value for signal `{signal}` at sample {row}")]
    NonFinite { row: usize, signal: String },
    #[error("time step must be positive and finite, got {0}")]
    NonPositiveDt(f64),
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("window of {duration} s is shorter than one time step of {dt} s")]
    WindowTooShort { duration: f64, dt: f64 },
    #[error("sine period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("step switch fraction must lie in [0, 1], got {0}")]
    SwitchFractionOutOfRange(f64),
    #[error("cannot concatenate traces with different signals: {left:?} vs {right:?}")]
    MismatchedSignals {
        left: Vec<String>,
        right: Vec<String>,
    },
    #[error("cannot concatenate traces with different time steps: {left} vs {right}")]
    MismatchedDt { left: f64, right: f64 },
    #[error("cannot concatenate an empty list of traces")]
    EmptyConcat,
    #[error("CSV row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
}

/// A uniformly sampled signal set: sample `k` is taken at
/// `start_time + k * dt`. Values are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    start_time: f64,
    dt: f64,
    names: Vec<String>,
    data: Vec<f64>,
    samples: usize,
}

impl Trace {
    /// Builds a trace from rows, one per sample.
    pub fn new(
        start_time: f64,
        dt: f64,
        names: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, TraceError> {
        let width = names.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(TraceError::RaggedRow {
                    row: i,
                    expected: width,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(start_time, dt, names, data, rows.len())
    }

    /// Builds a trace from equally long columns, one per signal.
    pub fn from_columns(
        start_time: f64,
        dt: f64,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, TraceError> {
        let samples = columns.first().map_or(0, Vec::len);
        if columns.len() != names.len() {
            return Err(TraceError::RaggedRow {
                row: 0,
                expected: names.len(),
                found: columns.len(),
            });
        }
        let mut data = Vec::with_capacity(samples * names.len());
        for k in 0..samples {
            for (j, col) in columns.iter().enumerate() {
                let v = *col.get(k).ok_or(TraceError::RaggedRow {
                    row: k,
                    expected: names.len(),
                    found: j,
                })?;
                data.push(v);
            }
        }
        if columns.iter().any(|c| c.len() != samples) {
            let bad = columns.iter().position(|c| c.len() != samples).unwrap_or(0);
            return Err(TraceError::RaggedRow {
                row: samples,
                expected: names.len(),
                found: bad,
            });
        }
        Self::from_flat(start_time, dt, names, data, samples)
    }

    fn from_flat(
        start_time: f64,
        dt: f64,
        names: Vec<String>,
        data: Vec<f64>,
        samples: usize,
    ) -> Result<Self, TraceError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TraceError::NonPositiveDt(dt));
        }
        if samples == 0 {
            return Err(TraceError::Empty);
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(TraceError::DuplicateSignal(name.clone()));
            }
        }
        if !start_time.is_finite() {
            return Err(TraceError::NonFinite {
                row: 0,
                signal: "time".into(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let width = names.len();
            return Err(TraceError::NonFinite {
                row: pos / width,
                signal: names[pos % width].clone(),
            });
        }
        Ok(Self {
            start_time,
            dt,
            names,
            data,
            samples,
        })
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of samples (always at least one).
    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_signals(&self) -> usize {
        self.names.len()
    }

    /// Time between the first and last sample.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.names.len();
        &self.data[k * w..(k + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.samples).map(|k| self.row(k))
    }

    pub fn value(&self, k: usize, signal: usize) -> f64 {
        self.data[k * self.names.len() + signal]
    }

    pub fn column(&self, signal: usize) -> Vec<f64> {
        self.rows().map(|row| row[signal]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.index_of(name).map(|j| self.column(j))
    }

    /// Returns a copy whose columns are reordered (and possibly subset) to
    /// follow `order`.
    pub fn select(&self, order: &[String]) -> Option<Trace> {
        let idx: Option<Vec<usize>> = order.iter().map(|n| self.index_of(n)).collect();
        let idx = idx?;
        let mut data = Vec::with_capacity(self.len() * idx.len());
        for row in self.rows() {
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Some(Trace {
            start_time: self.start_time,
            dt: self.dt,
            names: order.to_vec(),
            data,
            samples: self.samples,
        })
    }

    /// Renders the trace as CSV: header `time,<names...>`, one line per
    /// sample, shortest round-trip decimal numerals, LF line endings.
    pub fn write_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header = std::iter::once("time").chain(self.names.iter().map(String::as_str));
        wtr.write_record(header).expect("writing to memory");
        let mut record = Vec::with_capacity(self.names.len() + 1);
        for (k, row) in self.rows().enumerate() {
            record.clear();
            record.push(self.time(k).to_string());
            record.extend(row.iter().map(f64::to_string));
            wtr.write_record(&record).expect("writing to memory");
        }
        let bytes = wtr.into_inner().expect("flushing to memory");
        String::from_utf8(bytes).expect("CSV output is UTF-8")
    }

    /// Parses the format produced by [`Trace::write_csv`].
    ///
    /// The time step is recovered from the time column. A single-sample file
    /// carries no step information and gets `dt = 1`.
    pub fn read_csv(text: &str) -> Result<Trace, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let parse_err = |row: usize, column: usize, message: String| TraceError::Parse {
            row,
            column,
            message,
        };
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, 1, e.to_string()))?
            .clone();
        if headers.get(0) != Some("time") {
            return Err(parse_err(1, 1, "first column must be `time`".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            // Row numbers are 1-based file lines; the header is line 1.
            let line = i + 2;
            let record = record.map_err(|e| parse_err(line, 1, e.to_string()))?;
            if record.len() != names.len() + 1 {
                return Err(parse_err(
                    line,
                    record.len().min(names.len() + 1) + 1,
                    format!(
                        "expected {} fields, found {}",
                        names.len() + 1,
                        record.len()
                    ),
                ));
            }
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(line, j + 1, format!("`{field}` is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, j + 1, format!("`{field}` is not finite")));
                }
                if j == 0 {
                    times.push(v);
                } else {
                    data.push(v);
                }
            }
        }
        if times.is_empty() {
            return Err(parse_err(2, 1, "no samples".into()));
        }
        let dt = infer_dt(&times)
            .ok_or_else(|| parse_err(2, 1, "time column is not uniformly increasing".into()))?;
        let samples = times.len();
        Self::from_flat(times[0], dt, names, data, samples)
    }
}

/// Finds the step that reproduces every time stamp as `t0 + k * dt`,
/// searching a few ulps around the obvious estimates before falling back to
/// a tolerance check.
fn infer_dt(times: &[f64]) -> Option<f64> {
    let n = times.len();
    if n == 1 {
        return Some(1.0);
    }
    let t0 = times[0];
    let reproduces = |dt: f64| {
        times
            .iter()
            .enumerate()
            .all(|(k, &t)| t0 + k as f64 * dt == t)
    };
    let estimates = [times[1] - t0, (times[n - 1] - t0) / (n - 1) as f64];
    for &est in &estimates {
        if !(est > 0.0 && est.is_finite()) {
            continue;
        }
        for offset in [0i64, -1, 1, -2, 2, -3, 3, -4, 4] {
            let candidate = f64::from_bits((est.to_bits() as i64 + offset) as u64);
            if candidate > 0.0 && reproduces(candidate) {
                return Some(candidate);
            }
        }
    }
    let dt = estimates[1];
    if !(dt > 0.0 && dt.is_finite()) {
        return None;
    }
    let uniform = times.iter().enumerate().all(|(k, &t)| {
        let expected = t0 + k as f64 * dt;
        (expected - t).abs() <= 1e-6 * dt.max(t.abs() * GRID_EPS)
    });
    uniform.then_some(dt)
}

/// Number of whole time steps in `duration`, tolerant of representation
/// error in the ratio.
pub fn whole_steps(duration: f64, dt: f64) -> usize {
    let ratio = duration / dt;
    (ratio + GRID_EPS * ratio.abs().max(1.0)).floor().max(0.0) as usize
}

/// Number of samples produced for a window: `floor(duration / dt) + 1`.
pub fn sample_count(duration: f64, dt: f64) -> usize {
    whole_steps(duration, dt) + 1
}

/// A numeric field of a [`SignalExpression`]: a literal or a reference to a
/// named search parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Literal(f64),
    Param(String),
}

impl Value {
    pub fn resolve(&self, bindings: &Bindings) -> Result<f64, TraceError> {
        match self {
            Value::Literal(v) => Ok(*v),
            Value::Param(name) => bindings
                .get(name)
                .copied()
                .ok_or_else(|| TraceError::UnboundParameter(name.clone())),
        }
    }

    pub fn param(&self) -> Option<&str> {
        match self {
            Value::Literal(_) => None,
            Value::Param(name) => Some(name),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Literal(v) => write!(f, "{v}"),
            Value::Param(name) => f.write_str(name),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Literal(v)
    }
}

impl From<&str> for Value {
    fn from(name: &str) -> Self {
        Value::Param(name.to_string())
    }
}

/// Shape of one input signal over a test-sequence step.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalExpression {
    Constant(Value),
    /// Linear from `from` at the window start to `to` at the window end.
    Ramp {
        from: Value,
        to: Value,
    },
    /// `before` until `switch_fraction` of the window has elapsed, then `after`.
    Step {
        before: Value,
        after: Value,
        switch_fraction: Value,
    },
    /// `offset + amplitude * sin(2 pi t / period + phase)` in absolute time.
    Sine {
        offset: Value,
        amplitude: Value,
        period: Value,
        phase: Value,
    },
}

impl SignalExpression {
    pub fn values(&self) -> Vec<&Value> {
        match self {
            SignalExpression::Constant(v) => vec![v],
            SignalExpression::Ramp { from, to } => vec![from, to],
            SignalExpression::Step {
                before,
                after,
                switch_fraction,
            } => vec![before, after, switch_fraction],
            SignalExpression::Sine {
                offset,
                amplitude,
                period,
                phase,
            } => vec![offset, amplitude, period, phase],
        }
    }

    /// Parameter names referenced by this expression, in field order.
    pub fn params(&self) -> impl Iterator<Item = &str> {
        self.values().into_iter().filter_map(Value::param)
    }

    /// Same as [`sample_expression`].
    pub fn sample(
        &self,
        bindings: &Bindings,
        t0: f64,
        duration: f64,
        dt: f64,
    ) -> Result<Vec<f64>, TraceError> {
        sample_expression(self, bindings, t0, duration, dt)
    }
}

impl fmt::Display for SignalExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalExpression::Constant(v) => write!(f, "Constant({v})"),
            SignalExpression::Ramp { from, to } => write!(f, "Ramp({from}, {to})"),
            SignalExpression::Step {
                before,
                after,
                switch_fraction,
            } => write!(f, "Step({before}, {after}, {switch_fraction})"),
            SignalExpression::Sine {
                offset,
                amplitude,
                period,
                phase,
            } => write!(f, "Sine({offset}, {amplitude}, {period}, {phase})"),
        }
    }
}

/// Samples `expr` on the grid `t0 + k * dt`, `k = 0..=floor(duration / dt)`.
pub fn sample_expression(
    expr: &SignalExpression,
    bindings: &Bindings,
    t0: f64,
    duration: f64,
    dt: f64,
) -> Result<Vec<f64>, TraceError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TraceError::NonPositiveDt(dt));
    }
    if !(duration.is_finite() && whole_steps(duration, dt) >= 1) {
        return Err(TraceError::WindowTooShort { duration, dt });
    }
    let n = sample_count(duration, dt);
    let elapsed = |k: usize| k as f64 * dt;
    let out = match expr {
        SignalExpression::Constant(v) => vec![v.resolve(bindings)?; n],
        SignalExpression::Ramp { from, to } => {
            let from = from.resolve(bindings)?;
            let to = to.resolve(bindings)?;
            (0..n)
                .map(|k| {
                    let frac = elapsed(k) / duration;
                    if frac >= 1.0 {
                        to
                    } else {
                        from + (to - from) * frac
                    }
                })
                .collect()
        }
        SignalExpression::Step {
            before,
            after,
            switch_fraction,
        } => {
            let before = before.resolve(bindings)?;
            let after = after.resolve(bindings)?;
            let frac = switch_fraction.resolve(bindings)?;
            if !(0.0..=1.0).contains(&frac) {
                return Err(TraceError::SwitchFractionOutOfRange(frac));
            }
            let switch_at = frac * duration;
            (0..n)
                .map(|k| {
                    if elapsed(k) < switch_at {
                        before
                    } else {
                        after
                    }
                })
                .collect()
        }
        SignalExpression::Sine {
            offset,
            amplitude,
            period,
            phase,
        } => {
            let offset = offset.resolve(bindings)?;
            let amplitude = amplitude.resolve(bindings)?;
            let period = period.resolve(bindings)?;
            let phase = phase.resolve(bindings)?;
            if !(period > 0.0) {
                return Err(TraceError::NonPositivePeriod(period));
            }
            (0..n)
                .map(|k| {
                    let t = t0 + elapsed(k);
                    offset + amplitude * (2.0 * PI * t / period + phase).sin()
                })
                .collect()
        }
    };
    Ok(out)
}

/// Joins traces end to end. Consecutive traces share their boundary sample:
/// the first sample of every trace after the first is dropped.
pub fn concat(traces: &[Trace]) -> Result<Trace, TraceError> {
    let first = traces.first().ok_or(TraceError::EmptyConcat)?;
    let mut data = first.data.clone();
    let mut samples = first.samples;
    for t in &traces[1..] {
        if t.names != first.names {
            return Err(TraceError::MismatchedSignals {
                left: first.names.clone(),
                right: t.names.clone(),
            });
        }
        if t.dt != first.dt {
            return Err(TraceError::MismatchedDt {
                left: first.dt,
                right: t.dt,
            });
        }
        data.extend_from_slice(&t.data[t.names.len()..]);
        samples += t.samples - 1;
    }
    Ok(Trace {
        start_time: first.start_time,
        dt: first.dt,
        names: first.names.clone(),
        data,
        samples,
    })
}
