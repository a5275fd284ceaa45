//! Native plants: fixed-step RK4 simulators that map input traces to output
//! traces on the same time grid.

mod builtin;

use std::fmt;

use thiserror::Error;

use crate::trace::{Trace, TraceError, GRID_EPS};

pub use builtin::{cruise_control, ridge, water_tank};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("unknown plant `{0}`")]
    UnknownPlant(String),
    #[error("a plant named `{0}` is already registered")]
    DuplicatePlant(String),
    #[error("plant `{plant}`: {reason}")]
    InvalidModel { plant: String, reason: String },
    #[error("plant `{plant}` has no constant `{constant}`")]
    UnknownConstant { plant: String, constant: String },
    #[error("plant `{plant}` expects inputs {expected:?}, trace has {found:?}")]
    SignalMismatch {
        plant: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("integration step {step} does not divide the trace step {dt}")]
    InvalidStep { step: f64, dt: f64 },
    #[error("initial state has {found} entries, plant state has {expected}")]
    StateDimension { expected: usize, found: usize },
    #[error("numerical blowup at t = {time}")]
    NumericalBlowup { time: f64 },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// `dx = f(constants, x, u)`.
pub type DerivativeFn = fn(constants: &[f64], state: &[f64], input: &[f64], dx: &mut [f64]);
/// `y = g(constants, x, u)`.
pub type OutputFn = fn(constants: &[f64], state: &[f64], input: &[f64], y: &mut [f64]);

/// Descriptor of a simulated system. Cheap to clone and stateless; every
/// simulation owns its integration state.
#[derive(Clone)]
pub struct PlantModel {
    name: String,
    description: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    default_dt: f64,
    constants: Vec<(String, f64)>,
    initial_state: Vec<f64>,
    derivative: DerivativeFn,
    output: OutputFn,
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("default_dt", &self.default_dt)
            .field("constants", &self.constants)
            .field("initial_state", &self.initial_state)
            .finish()
    }
}

impl PlantModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        inputs: Vec<String>,
        outputs: Vec<String>,
        default_dt: f64,
        constants: Vec<(String, f64)>,
        initial_state: Vec<f64>,
        derivative: DerivativeFn,
        output: OutputFn,
    ) -> Result<Self, PlantError> {
        let name = name.into();
        let invalid = |reason: String| PlantError::InvalidModel {
            plant: name.clone(),
            reason,
        };
        if !(default_dt > 0.0 && default_dt.is_finite()) {
            return Err(invalid(format!(
                "default dt must be positive, got {default_dt}"
            )));
        }
        let signals: Vec<&String> = inputs.iter().chain(&outputs).collect();
        for (i, s) in signals.iter().enumerate() {
            if signals[..i].contains(s) {
                return Err(invalid(format!(
                    "signal `{s}` appears twice among inputs and outputs"
                )));
            }
        }
        for (i, (c, v)) in constants.iter().enumerate() {
            if constants[..i].iter().any(|(d, _)| d == c) {
                return Err(invalid(format!("constant `{c}` is declared twice")));
            }
            if !v.is_finite() {
                return Err(invalid(format!("constant `{c}` is not finite")));
            }
        }
        if initial_state.is_empty() || initial_state.iter().any(|x| !x.is_finite()) {
            return Err(invalid("initial state must be non-empty and finite".into()));
        }
        Ok(Self {
            name,
            description: description.into(),
            inputs,
            outputs,
            default_dt,
            constants,
            initial_state,
            derivative,
            output,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Outputs followed by inputs: the columns of a simulated trace.
    pub fn signals(&self) -> Vec<String> {
        self.outputs.iter().chain(&self.inputs).cloned().collect()
    }

    pub fn default_dt(&self) -> f64 {
        self.default_dt
    }

    pub fn constants(&self) -> &[(String, f64)] {
        &self.constants
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|(c, _)| c == name)
            .map(|(_, v)| *v)
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn state_dim(&self) -> usize {
        self.initial_state.len()
    }

    /// Returns a copy with one constant replaced.
    /// Integration step for inputs sampled every `sample_dt`: the default
    /// step when it evenly divides a coarser sample grid, otherwise `None`
    /// (integrate once per sample).
    pub fn integration_step(&self, sample_dt: f64) -> Option<f64> {
        let ratio = sample_dt / self.default_dt;
        let n = ratio.round();
        (n > 1.0 && (ratio - n).abs() <= GRID_EPS * n).then_some(self.default_dt)
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Result<Self, PlantError> {
        if !value.is_finite() {
            return Err(PlantError::InvalidModel {
                plant: self.name,
                reason: format!("constant `{name}` must be finite"),
            });
        }
        match self.constants.iter_mut().find(|(c, _)| c == name) {
            Some(slot) => slot.1 = value,
            None => {
                return Err(PlantError::UnknownConstant {
                    plant: self.name,
                    constant: name.to_string(),
                })
            }
        }
        Ok(self)
    }

    pub fn with_constants<'a>(
        self,
        overrides: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, PlantError> {
        overrides
            .into_iter()
            .try_fold(self, |p, (name, v)| p.with_constant(name, v))
    }
}

/// Integration options. Defaults integrate once per trace sample from the
/// plant's own initial state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationOptions {
    /// Integration step; must divide the trace step.
    pub dt: Option<f64>,
    pub initial_state: Option<Vec<f64>>,
}

/// Simulates `plant` on `inputs` with default options.
pub fn simulate(plant: &PlantModel, inputs: &Trace) -> Result<Trace, PlantError> {
    simulate_with(plant, inputs, &SimulationOptions::default())
}

/// Integrates with classic RK4, holding each input sample constant until the
/// next one. The result has the plant outputs followed by the inputs, on the
/// input grid.
pub fn simulate_with(
    plant: &PlantModel,
    inputs: &Trace,
    options: &SimulationOptions,
) -> Result<Trace, PlantError> {
    let u_trace = inputs
        .select(&plant.inputs)
        .ok_or_else(|| PlantError::SignalMismatch {
            plant: plant.name.clone(),
            expected: plant.inputs.clone(),
            found: inputs.names().to_vec(),
        })?;
    if inputs.num_signals() != plant.inputs.len() {
        return Err(PlantError::SignalMismatch {
            plant: plant.name.clone(),
            expected: plant.inputs.clone(),
            found: inputs.names().to_vec(),
        });
    }
    let dt = inputs.dt();
    let substeps = match options.dt {
        None => 1,
        Some(h) => {
            let ratio = dt / h;
            let n = ratio.round();
            if !(h > 0.0 && n >= 1.0 && (ratio - n).abs() <= GRID_EPS * n) {
                return Err(PlantError::InvalidStep { step: h, dt });
            }
            n as usize
        }
    };
    let h = dt / substeps as f64;
    let mut x = match &options.initial_state {
        Some(x0) if x0.len() != plant.state_dim() => {
            return Err(PlantError::StateDimension {
                expected: plant.state_dim(),
                found: x0.len(),
            })
        }
        Some(x0) => x0.clone(),
        None => plant.initial_state.clone(),
    };
    let consts: Vec<f64> = plant.constants.iter().map(|(_, v)| *v).collect();
    let n_out = plant.outputs.len();
    let n_in = plant.inputs.len();
    let mut rk = Rk4::new(x.len());
    let mut y = vec![0.0; n_out];
    let mut rows = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let u = u_trace.row(k);
        if k > 0 {
            let u_prev = u_trace.row(k - 1);
            for s in 0..substeps {
                rk.step(plant.derivative, &consts, &mut x, u_prev, h);
                if x.iter().any(|v| !v.is_finite()) {
                    let time = inputs.time(k - 1) + (s + 1) as f64 * h;
                    return Err(PlantError::NumericalBlowup { time });
                }
            }
        }
        (plant.output)(&consts, &x, u, &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NumericalBlowup {
                time: inputs.time(k),
            });
        }
        let mut row = Vec::with_capacity(n_out + n_in);
        row.extend_from_slice(&y);
        row.extend_from_slice(u);
        rows.push(row);
    }
    Ok(Trace::new(inputs.start_time(), dt, plant.signals(), rows)?)
}

/// Scratch space for classic fourth-order Runge-Kutta steps.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, f: DerivativeFn, c: &[f64], x: &mut [f64], u: &[f64], h: f64) {
        f(c, x, u, &mut self.k1);
        axpy(&mut self.tmp, x, 0.5 * h, &self.k1);
        f(c, &self.tmp, u, &mut self.k2);
        axpy(&mut self.tmp, x, 0.5 * h, &self.k2);
        f(c, &self.tmp, u, &mut self.k3);
        axpy(&mut self.tmp, x, h, &self.k3);
        f(c, &self.tmp, u, &mut self.k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn axpy(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, x), k) in out.iter_mut().zip(x).zip(k) {
        *o = x + a * k;
    }
}

/// Named plants available to runs.
#[derive(Debug, Clone)]
pub struct PlantRegistry {
    plants: Vec<PlantModel>,
}

impl Default for PlantRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PlantRegistry {
    pub fn empty() -> Self {
        Self { plants: Vec::new() }
    }

    pub fn builtin() -> Self {
        Self {
            plants: vec![cruise_control(), water_tank(), ridge()],
        }
    }

    pub fn register(&mut self, plant: PlantModel) -> Result<(), PlantError> {
        if self.get(plant.name()).is_some() {
            return Err(PlantError::DuplicatePlant(plant.name.clone()));
        }
        self.plants.push(plant);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&PlantModel> {
        self.plants.iter().find(|p| p.name == name)
    }

    pub fn lookup(&self, name: &str) -> Result<&PlantModel, PlantError> {
        self.get(name)
            .ok_or_else(|| PlantError::UnknownPlant(name.to_string()))
    }

    pub fn plants(&self) -> &[PlantModel] {
        &self.plants
    }
}

/// The built-in plants.
pub fn list_plants() -> Vec<PlantModel> {
    PlantRegistry::builtin().plants
}

/// Looks up a built-in plant by name.
pub fn plant(name: &str) -> Result<PlantModel, PlantError> {
    PlantRegistry::builtin().lookup(name).cloned()
}
