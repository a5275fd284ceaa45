use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fitness::{ManualFitness, DEFAULT_WEIGHT};
use crate::plants::PlantRegistry;
use crate::search::{Problem, Requirement, SearchBudget, SearchConfig};
use crate::stl::parse_stl;
use crate::testseq::{parse_testsuite, TestSuite};

use super::{read_file, CliError};

/// Where the requirement comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RequirementSource {
    /// Inline STL text, `{"stl": "..."}`.
    Stl(String),
    /// The suite's `assess` clauses, `"assessment"`.
    Assessment,
    /// The suite's requirements table, `"table"`.
    Table,
}

/// One falsification run, as stored in a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: String,
    #[serde(default)]
    pub plant_constants: BTreeMap<String, f64>,
    /// Relative paths resolve against the config file's directory.
    pub test_suite: PathBuf,
    pub requirement: RequirementSource,
    #[serde(default)]
    pub manual_fitness: Option<String>,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Sampling step; the plant's default when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub search: SearchConfig,
    pub budget: SearchBudget,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_weight() -> f64 {
    DEFAULT_WEIGHT
}

/// Reads and validates a run config.
pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = read_file(path)?;
    let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.validate().map_err(|message| CliError::Config {
        path: path.to_path_buf(),
        message,
    })?;
    Ok(config)
}

impl RunConfig {
    fn validate(&self) -> Result<(), String> {
        if self.plant.trim().is_empty() {
            return Err("field `plant` must name a plant".into());
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(format!(
                "field `weight` must lie in [0, 1], got {}",
                self.weight
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(format!("field `dt` must be positive, got {dt}"));
            }
        }
        if !self.suite_path().is_file() {
            return Err(format!(
                "field `test_suite`: {} does not exist",
                self.suite_path().display()
            ));
        }
        Ok(())
    }

    pub fn suite_path(&self) -> PathBuf {
        self.base_dir.join(&self.test_suite)
    }

    /// Output directory, resolved against the config directory; `results`
    /// when unset.
    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(
            self.output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("results")),
        )
    }

    pub fn load_suite(&self) -> Result<TestSuite, CliError> {
        let path = self.suite_path();
        parse_testsuite(&read_file(&path)?).map_err(|source| CliError::TestSuite { path, source })
    }

    /// Resolves plant, suite, requirement and manual fitness into a problem.
    pub fn problem(&self, registry: &PlantRegistry) -> Result<Problem, CliError> {
        let plant = registry
            .lookup(&self.plant)?
            .clone()
            .with_constants(self.plant_constants.iter().map(|(k, v)| (k.as_str(), *v)))?;
        let suite = self.load_suite()?;
        let requirement = match &self.requirement {
            RequirementSource::Stl(text) => Requirement::Formula(parse_stl(text)?),
            RequirementSource::Assessment => {
                if suite.assessment.is_empty() {
                    return Err(CliError::Invalid(format!(
                        "{} has no assess clauses",
                        self.suite_path().display()
                    )));
                }
                Requirement::Assessment(suite.assessment)
            }
            RequirementSource::Table => Requirement::Table(suite.table.ok_or_else(|| {
                CliError::Invalid(format!(
                    "{} has no requirements table",
                    self.suite_path().display()
                ))
            })?),
        };
        let manual = self
            .manual_fitness
            .as_deref()
            .map(ManualFitness::parse)
            .transpose()?;
        let dt = self.dt.unwrap_or(plant.default_dt());
        Ok(Problem::new(
            plant,
            suite.sequence,
            requirement,
            manual,
            self.weight,
            dt,
        )?)
    }
}
