//! Falsification search over a test sequence's parameters.
//!
//! Every evaluation instantiates the sequence, simulates the plant, compiles
//! the requirement for the candidate's timeline and scores the output. Runs
//! stop at the first candidate with negative robustness. All randomness comes
//! from one ChaCha8 stream seeded with the run seed: per proposal one draw
//! per dimension in order, then at most one uniform draw for acceptance.

mod archive;
mod proposal;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{
    assess, combine, Channel, FitnessError, FitnessReport, ManualFitness, NormalizerState,
};
use crate::plants::{simulate_with, PlantError, PlantModel, SimulationOptions};
use crate::stl::StlFormula;
use crate::testseq::{
    compile_assessment, compile_table, AssessmentSpec, RequirementsTable, SearchSpace,
    TestSeqError, TestSequenceSpec,
};
use crate::trace::Trace;

pub use archive::{archive_csv, ArchiveEntry};
pub use proposal::{metropolis_accept, propose_neighbor, propose_uniform, reflect};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("signal `{signal}` is neither an input nor an output of plant `{plant}`")]
    UnknownSignal { signal: String, plant: String },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    TestSeq(#[from] TestSeqError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    UniformRandom,
    SimulatedAnnealing,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::UniformRandom => "uniform_random",
            Algorithm::SimulatedAnnealing => "simulated_annealing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub initial_temperature: f64,
    /// Geometric cooling factor, applied after every evaluation.
    pub cooling: f64,
    /// Proposal standard deviation as a fraction of each dimension's width.
    pub step_fraction: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::SimulatedAnnealing,
            seed: 0,
            initial_temperature: 0.1,
            cooling: 0.95,
            step_fraction: 0.1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return bad(format!(
                "initial_temperature must be positive, got {}",
                self.initial_temperature
            ));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return bad(format!("cooling must lie in (0, 1), got {}", self.cooling));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return bad(format!(
                "step_fraction must lie in (0, 1], got {}",
                self.step_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBudget {
    pub max_evaluations: usize,
    #[serde(default)]
    pub max_wall_seconds: Option<f64>,
}

impl SearchBudget {
    pub fn evaluations(max_evaluations: usize) -> Self {
        Self {
            max_evaluations,
            max_wall_seconds: None,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        match self.max_wall_seconds {
            Some(s) if !(s >= 0.0) => Err(SearchError::InvalidConfig(format!(
                "max_wall_seconds must be non-negative, got {s}"
            ))),
            _ => Ok(()),
        }
    }
}

/// What the candidate traces are checked against.
#[derive(Debug, Clone, PartialEq)]
pub enum Requirement {
    Formula(StlFormula),
    Assessment(AssessmentSpec),
    Table(RequirementsTable),
}

impl Requirement {
    fn formulas(&self) -> Vec<&StlFormula> {
        match self {
            Requirement::Formula(phi) => vec![phi],
            Requirement::Assessment(a) => a.clauses.iter().map(|c| &c.condition).collect(),
            Requirement::Table(t) => t
                .rows()
                .iter()
                .flat_map(|r| [&r.precondition, &r.postcondition])
                .collect(),
        }
    }
}

/// Everything a run needs besides its configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    plant: PlantModel,
    sequence: TestSequenceSpec,
    requirement: Requirement,
    manual: Option<ManualFitness>,
    weight: f64,
    dt: f64,
}

/// Result of evaluating one candidate.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: FitnessReport,
    /// Simulated trace; `None` when the simulation blew up.
    pub trace: Option<Trace>,
}

impl Problem {
    /// Checks that the sequence drives exactly the plant inputs, that every
    /// signal the requirement and manual fitness mention exists, and that
    /// the weight and sampling step are valid.
    ///
    /// At weight 1 the manual expression cannot influence anything, so it is
    /// not evaluated and the run matches one without manual fitness.
    pub fn new(
        plant: PlantModel,
        sequence: TestSequenceSpec,
        requirement: Requirement,
        manual: Option<ManualFitness>,
        weight: f64,
        dt: f64,
    ) -> Result<Self, SearchError> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(FitnessError::WeightOutOfRange(weight).into());
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SearchError::InvalidConfig(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let mut expected = plant.inputs().to_vec();
        let mut found = sequence.inputs().to_vec();
        expected.sort();
        found.sort();
        if expected != found {
            return Err(PlantError::SignalMismatch {
                plant: plant.name().to_string(),
                expected: plant.inputs().to_vec(),
                found: sequence.inputs().to_vec(),
            }
            .into());
        }
        let known = plant.signals();
        let mentioned = requirement
            .formulas()
            .into_iter()
            .flat_map(|phi| phi.signals())
            .chain(manual.iter().flat_map(|m| m.signals()))
            .find(|s| !known.iter().any(|k| k == s));
        if let Some(signal) = mentioned {
            return Err(SearchError::UnknownSignal {
                signal: signal.to_string(),
                plant: plant.name().to_string(),
            });
        }
        let manual = if weight == 1.0 { None } else { manual };
        Ok(Self {
            plant,
            sequence,
            requirement,
            manual,
            weight,
            dt,
        })
    }

    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    pub fn sequence(&self) -> &TestSequenceSpec {
        &self.sequence
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn search_space(&self) -> SearchSpace {
        self.sequence.search_space()
    }

    /// The requirement compiled for one candidate's timeline.
    pub fn requirement_for(&self, values: &[f64]) -> Result<StlFormula, SearchError> {
        Ok(match &self.requirement {
            Requirement::Formula(phi) => phi.clone(),
            Requirement::Assessment(a) => {
                compile_assessment(a, &self.sequence.timeline(values, Some(self.dt))?)?
            }
            Requirement::Table(t) => {
                compile_table(t, self.sequence.timeline(values, Some(self.dt))?.total())?
            }
        })
    }

    /// Instantiates and simulates one candidate, integrating at the plant's
    /// default step when it divides the sampling step.
    pub fn simulate(&self, values: &[f64]) -> Result<Trace, SearchError> {
        let inputs = self.sequence.instantiate(values, self.dt)?;
        let options = SimulationOptions {
            dt: self.plant.integration_step(self.dt),
            initial_state: None,
        };
        Ok(simulate_with(&self.plant, &inputs, &options)?)
    }

    /// Simulates and scores one candidate, updating the run's normalizers.
    /// A numerical blowup yields the worst-case report and leaves the
    /// normalizers untouched.
    pub fn evaluate(
        &self,
        values: &[f64],
        state: &mut NormalizerState,
    ) -> Result<Evaluation, SearchError> {
        let phi = self.requirement_for(values)?;
        let trace = match self.simulate(values) {
            Ok(t) => t,
            Err(SearchError::Plant(PlantError::NumericalBlowup { .. })) => {
                return Ok(Evaluation {
                    report: FitnessReport::worst_case(self.effective_weight()),
                    trace: None,
                })
            }
            Err(e) => return Err(e),
        };
        let report = assess(&trace, &phi, self.manual.as_ref(), self.weight, state)?;
        Ok(Evaluation {
            report,
            trace: Some(trace),
        })
    }

    fn effective_weight(&self) -> f64 {
        if self.manual.is_some() {
            self.weight
        } else {
            1.0
        }
    }

    /// Combined fitness of earlier raw values under the current normalizers.
    fn rescaled(&self, report: &FitnessReport, state: &NormalizerState) -> f64 {
        if report.raw_automatic.is_nan() {
            return report.combined;
        }
        let na = state.rescale(report.raw_automatic, Channel::Automatic);
        let nm = state.rescale(report.raw_manual, Channel::Manual);
        combine(na, nm, report.weight_used).expect("weight validated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Falsified,
    #[serde(rename = "NFF")]
    Nff,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Falsified => "Falsified",
            Outcome::Nff => "NFF",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub outcome: Outcome,
    /// Entry with the lowest raw robustness (earliest on ties); equals the
    /// falsifying entry when there is one.
    pub best: Option<ArchiveEntry>,
    pub falsifying: Option<ArchiveEntry>,
    pub falsifying_trace: Option<Trace>,
    pub archive: Vec<ArchiveEntry>,
    pub evaluations: usize,
    pub elapsed_seconds: f64,
}

impl SearchResult {
    /// Index of the falsifying evaluation.
    pub fn evaluations_to_falsify(&self) -> Option<usize> {
        self.falsifying.as_ref().map(|e| e.index)
    }
}

/// Runs one search. Uniform random search draws every candidate
/// independently. Simulated annealing starts at the nominal vector, proposes
/// reflected Gaussian steps, accepts by the Metropolis rule on the combined
/// fitness and cools after every evaluation. A sequence without parameters
/// is evaluated once.
pub fn run_search(
    problem: &Problem,
    config: &SearchConfig,
    budget: &SearchBudget,
) -> Result<SearchResult, SearchError> {
    config.validate()?;
    budget.validate()?;
    let started = Instant::now();
    let domain = problem.search_space();
    let limit = if domain.dim() == 0 {
        budget.max_evaluations.min(1)
    } else {
        budget.max_evaluations
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = NormalizerState::new();
    let mut archive: Vec<ArchiveEntry> = Vec::new();
    let mut falsifying_trace = None;
    let mut temperature = config.initial_temperature;
    // Annealing chain position and its report.
    let mut current: Option<(Vec<f64>, FitnessReport)> = None;

    while archive.len() < limit {
        if let Some(wall) = budget.max_wall_seconds {
            if started.elapsed().as_secs_f64() >= wall {
                break;
            }
        }
        let candidate = match (config.algorithm, &current) {
            (Algorithm::UniformRandom, _) => propose_uniform(&mut rng, &domain),
            (Algorithm::SimulatedAnnealing, None) => domain.nominal.clone(),
            (Algorithm::SimulatedAnnealing, Some((x, _))) => {
                propose_neighbor(x, &mut rng, &domain, config.step_fraction)
            }
        };
        let Evaluation { report, trace } = problem.evaluate(&candidate, &mut state)?;
        let accepted = match config.algorithm {
            Algorithm::UniformRandom => false,
            Algorithm::SimulatedAnnealing => {
                let accepted = match &current {
                    None => true,
                    Some((_, cur)) => {
                        let delta = report.combined - problem.rescaled(cur, &state);
                        metropolis_accept(delta, temperature, &mut rng)
                    }
                };
                temperature *= config.cooling;
                if accepted {
                    current = Some((candidate.clone(), report));
                }
                accepted
            }
        };
        archive.push(ArchiveEntry {
            index: archive.len() + 1,
            params: candidate,
            report,
            accepted,
        });
        if report.falsified {
            falsifying_trace = trace;
            break;
        }
    }

    let falsifying = archive.last().filter(|e| e.report.falsified).cloned();
    let best = archive
        .iter()
        .filter(|e| !e.report.raw_automatic.is_nan())
        .fold(None::<&ArchiveEntry>, |best, e| match best {
            Some(b) if b.report.raw_automatic <= e.report.raw_automatic => Some(b),
            _ => Some(e),
        })
        .or(archive.first())
        .cloned();
    Ok(SearchResult {
        outcome: if falsifying.is_some() {
            Outcome::Falsified
        } else {
            Outcome::Nff
        },
        best,
        falsifying,
        falsifying_trace,
        evaluations: archive.len(),
        archive,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}
