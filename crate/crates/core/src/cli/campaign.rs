use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::plants::PlantRegistry;
use crate::search::{run_search, Algorithm, Outcome, Problem, SearchConfig};

use super::config::{load_run_config, RunConfig};
use super::{format_significant, read_file, write_file, CliError};

/// Base run: a path to a run config (relative to the campaign file) or an
/// inline one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseConfig {
    Path(PathBuf),
    Inline(Box<RunConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    Weights(Vec<f64>),
    Algorithms(Vec<Algorithm>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub base: BaseConfig,
    pub repetitions: usize,
    /// Run `i` (1-based) uses seed `base_seed + i - 1`.
    pub base_seed: u64,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Reads a campaign file and resolves its base run config.
pub fn load_campaign(path: &Path) -> Result<(CampaignConfig, RunConfig), CliError> {
    let invalid = |message: String| CliError::Config {
        path: path.to_path_buf(),
        message,
    };
    let mut campaign: CampaignConfig =
        serde_json::from_str(&read_file(path)?).map_err(|e| invalid(e.to_string()))?;
    campaign.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if campaign.repetitions == 0 {
        return Err(invalid("field `repetitions` must be at least 1".into()));
    }
    match &campaign.sweep {
        Some(Sweep::Weights(w)) if w.is_empty() || w.iter().any(|w| !(0.0..=1.0).contains(w)) => {
            return Err(invalid(
                "field `sweep.weights` needs values in [0, 1]".into(),
            ))
        }
        Some(Sweep::Algorithms(a)) if a.is_empty() => {
            return Err(invalid("field `sweep.algorithms` must not be empty".into()))
        }
        _ => {}
    }
    let run = match &campaign.base {
        BaseConfig::Path(p) => load_run_config(&campaign.base_dir.join(p))?,
        BaseConfig::Inline(run) => {
            let mut run = (**run).clone();
            run.base_dir = campaign.base_dir.clone();
            run
        }
    };
    Ok((campaign, run))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignRow {
    /// Weight or algorithm name; empty without a sweep.
    pub sweep_value: String,
    pub run: usize,
    pub seed: u64,
    /// `Falsified`, `NFF` or `error: <message>`.
    pub verdict: String,
    pub evals_to_falsify: Option<usize>,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub sweep_value: String,
    pub runs: usize,
    pub falsified: usize,
    pub errors: usize,
    /// Median evaluations-to-falsify counting unfalsified runs as infinite.
    pub median_evals: f64,
}

impl SweepSummary {
    pub fn rate(&self) -> f64 {
        self.falsified as f64 / self.runs as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub rows: Vec<CampaignRow>,
    pub summaries: Vec<SweepSummary>,
}

impl CampaignReport {
    /// `campaign.csv` contents, rows in sweep-then-run order.
    pub fn csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer
            .write_record([
                "sweep_value",
                "run",
                "seed",
                "verdict",
                "evals_to_falsify",
                "elapsed",
            ])
            .expect("in-memory write");
        for r in &self.rows {
            writer
                .write_record([
                    r.sweep_value.clone(),
                    r.run.to_string(),
                    r.seed.to_string(),
                    r.verdict.clone(),
                    r.evals_to_falsify
                        .map(|n| n.to_string())
                        .unwrap_or_default(),
                    format!("{:.6}", r.elapsed),
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    /// One line per sweep point.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for s in &self.summaries {
            let label = if s.sweep_value.is_empty() {
                "all"
            } else {
                &s.sweep_value
            };
            write!(
                out,
                "{label}: falsified {}/{} ({:.0}%), median evaluations to falsify {}",
                s.falsified,
                s.runs,
                100.0 * s.rate(),
                format_significant(s.median_evals, 6)
            )
            .unwrap();
            if s.errors > 0 {
                write!(out, ", {} errors", s.errors).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Median with unfalsified runs as `+inf`; the mean of the middle pair for
/// even counts.
pub fn median_evaluations(evals: &[Option<usize>]) -> f64 {
    if evals.is_empty() {
        return f64::NAN;
    }
    let mut values: Vec<f64> = evals
        .iter()
        .map(|e| e.map_or(f64::INFINITY, |n| n as f64))
        .collect();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        let (a, b) = (values[n / 2 - 1], values[n / 2]);
        if b.is_infinite() {
            b
        } else {
            (a + b) / 2.0
        }
    }
}

struct SweepPoint {
    label: String,
    problem: Result<Problem, String>,
    search: SearchConfig,
}

/// Runs every sweep point `repetitions` times on up to `jobs` threads. Runs
/// share nothing; rows come back in sweep-then-run order whatever the
/// completion order. A failing run is recorded in its row.
pub fn run_campaign(
    campaign: &CampaignConfig,
    base: &RunConfig,
    jobs: usize,
) -> Result<CampaignReport, CliError> {
    let registry = PlantRegistry::builtin();
    let point = |label: String, run: &RunConfig| SweepPoint {
        label,
        problem: run.problem(&registry).map_err(|e| e.to_string()),
        search: run.search,
    };
    let points: Vec<SweepPoint> = match &campaign.sweep {
        None => vec![point(String::new(), base)],
        Some(Sweep::Weights(weights)) => weights
            .iter()
            .map(|&w| {
                let mut run = base.clone();
                run.weight = w;
                point(w.to_string(), &run)
            })
            .collect(),
        Some(Sweep::Algorithms(algorithms)) => algorithms
            .iter()
            .map(|&a| {
                let mut run = base.clone();
                run.search.algorithm = a;
                point(a.name().to_string(), &run)
            })
            .collect(),
    };
    let jobs_list: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (1..=campaign.repetitions).map(move |r| (p, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    let rows: Vec<CampaignRow> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|&(p, run)| {
                let point = &points[p];
                let seed = campaign.base_seed.wrapping_add(run as u64 - 1);
                let search = SearchConfig {
                    seed,
                    ..point.search
                };
                let outcome = point
                    .problem
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|problem| {
                        run_search(problem, &search, &base.budget).map_err(|e| e.to_string())
                    });
                match outcome {
                    Ok(result) => CampaignRow {
                        sweep_value: point.label.clone(),
                        run,
                        seed,
                        verdict: result.outcome.label().to_string(),
                        evals_to_falsify: match result.outcome {
                            Outcome::Falsified => result.evaluations_to_falsify(),
                            Outcome::Nff => None,
                        },
                        elapsed: result.elapsed_seconds,
                    },
                    Err(message) => CampaignRow {
                        sweep_value: point.label.clone(),
                        run,
                        seed,
                        verdict: format!("error: {message}"),
                        evals_to_falsify: None,
                        elapsed: 0.0,
                    },
                }
            })
            .collect()
    });
    let summaries = points
        .iter()
        .map(|point| {
            let mine: Vec<&CampaignRow> = rows
                .iter()
                .filter(|r| r.sweep_value == point.label)
                .collect();
            SweepSummary {
                sweep_value: point.label.clone(),
                runs: mine.len(),
                falsified: mine
                    .iter()
                    .filter(|r| r.verdict == Outcome::Falsified.label())
                    .count(),
                errors: mine
                    .iter()
                    .filter(|r| r.verdict.starts_with("error"))
                    .count(),
                median_evals: median_evaluations(
                    &mine.iter().map(|r| r.evals_to_falsify).collect::<Vec<_>>(),
                ),
            }
        })
        .collect();
    Ok(CampaignReport { rows, summaries })
}

/// Writes `campaign.csv` into `dir` and returns its path.
pub fn write_campaign(report: &CampaignReport, dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join("campaign.csv");
    write_file(&path, &report.csv())?;
    Ok(path)
}

impl CampaignConfig {
    /// Output directory, resolved against the campaign file; `results` when
    /// unset.
    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(
            self.output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("results")),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians_treat_nff_as_infinite() {
        assert_eq!(median_evaluations(&[Some(3), None, Some(1)]), 3.0);
        assert_eq!(median_evaluations(&[Some(3), Some(5)]), 4.0);
        assert_eq!(median_evaluations(&[Some(3), None]), f64::INFINITY);
        assert_eq!(median_evaluations(&[None, None, Some(2)]), f64::INFINITY);
        assert!(median_evaluations(&[]).is_nan());
    }

    fn setup(dir: &Path, campaign: &str) -> PathBuf {
        std::fs::write(
            dir.join("s.suite"),
            "param p in [0, 1] nominal 0.5; step 5 { throttle = p; brake = 0; }",
        )
        .unwrap();
        std::fs::write(
            dir.join("run.json"),
            r#"{"plant": "cruise_control", "test_suite": "s.suite", "requirement": {"stl": "G[0,5](speed <= 30)"},
                "manual_fitness": "1 - mean(throttle)", "dt": 0.1, "budget": {"max_evaluations": 20}}"#,
        )
        .unwrap();
        let path = dir.join("campaign.json");
        std::fs::write(&path, campaign).unwrap();
        path
    }

    #[test]
    fn rows_follow_sweep_and_run_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = setup(
            dir.path(),
            r#"{"base": "run.json", "repetitions": 4, "base_seed": 10, "sweep": {"weights": [0, 0.5, 1]}}"#,
        );
        let (campaign, base) = load_campaign(&path).unwrap();
        let report = run_campaign(&campaign, &base, 3).unwrap();
        assert_eq!(report.rows.len(), 12);
        let order: Vec<(String, usize, u64)> = report
            .rows
            .iter()
            .map(|r| (r.sweep_value.clone(), r.run, r.seed))
            .collect();
        assert_eq!(order[0], ("0".into(), 1, 10));
        assert_eq!(order[5], ("0.5".into(), 2, 11));
        assert_eq!(order[11], ("1".into(), 4, 13));
        assert_eq!(report.summaries.len(), 3);
        // Same seeds single-threaded give the same rows apart from timing.
        let serial = run_campaign(&campaign, &base, 1).unwrap();
        let strip = |r: &CampaignReport| {
            r.rows
                .iter()
                .map(|r| (r.verdict.clone(), r.evals_to_falsify))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&report), strip(&serial));
        assert!(report
            .csv()
            .starts_with("sweep_value,run,seed,verdict,evals_to_falsify,elapsed\n0,1,10,"));
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        for text in [
            r#"{"base": "run.json", "repetitions": 0, "base_seed": 1}"#,
            r#"{"base": "run.json", "repetitions": 1, "base_seed": 1, "sweep": {"weights": [1.5]}}"#,
            r#"{"base": "missing.json", "repetitions": 1, "base_seed": 1}"#,
        ] {
            let path = setup(dir.path(), text);
            assert!(load_campaign(&path).is_err(), "{text}");
        }
    }
}
