use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::plants::PlantRegistry;
use crate::search::{archive_csv, run_search, ArchiveEntry, SearchResult};
use crate::stl::{parse_stl, robustness};
use crate::testseq::{compile_assessment, compile_table, parse_testsuite};
use crate::trace::Trace;

use super::config::{load_run_config, RunConfig};
use super::{format_significant, read_file, write_file, CliError};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "FALSIFY_SEED";

/// Seed from [`SEED_ENV`], if set.
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text.trim().parse().map(Some).map_err(|_| {
            CliError::Invalid(format!(
                "{SEED_ENV}={text:?} is not an unsigned 64-bit integer"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Invalid(format!("{SEED_ENV}: {e}"))),
    }
}

#[derive(Debug, Clone, Default)]
pub struct FalsifyOptions {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct FalsifyOutput {
    pub result: SearchResult,
    pub output_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ResultDocument<'a> {
    verdict: &'static str,
    seed: u64,
    algorithm: &'static str,
    evaluations: usize,
    parameter_names: Vec<String>,
    best: Option<&'a ArchiveEntry>,
    falsifying: Option<&'a ArchiveEntry>,
    config: &'a RunConfig,
    elapsed_seconds: f64,
    timestamp: String,
}

/// `result.json` contents. Only `elapsed_seconds` and `timestamp` vary
/// between identical runs.
pub fn result_document(
    config: &RunConfig,
    parameter_names: Vec<String>,
    result: &SearchResult,
) -> String {
    let doc = ResultDocument {
        verdict: result.outcome.label(),
        seed: config.search.seed,
        algorithm: config.search.algorithm.name(),
        evaluations: result.evaluations,
        parameter_names,
        best: result.best.as_ref(),
        falsifying: result.falsifying.as_ref(),
        config,
        elapsed_seconds: result.elapsed_seconds,
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable document");
    text.push('\n');
    text
}

/// Runs one configured search and writes `result.json`, `archive.csv` and,
/// when a counterexample is found, `falsifying_trace.csv`.
pub fn falsify(config_path: &Path, options: &FalsifyOptions) -> Result<FalsifyOutput, CliError> {
    let mut config = load_run_config(config_path)?;
    if let Some(seed) = options.seed {
        config.search.seed = seed;
    }
    let problem = config.problem(&PlantRegistry::builtin())?;
    let result = run_search(&problem, &config.search, &config.budget)?;
    let output_dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| config.output_path());
    std::fs::create_dir_all(&output_dir).map_err(|source| CliError::Io {
        path: output_dir.clone(),
        source,
    })?;
    let space = problem.search_space();
    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), CliError> {
        let path = output_dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit(
        "result.json",
        result_document(&config, space.names.clone(), &result),
    )?;
    emit("archive.csv", archive_csv(&result.archive, space.dim()))?;
    if let Some(trace) = &result.falsifying_trace {
        emit("falsifying_trace.csv", trace.write_csv())?;
    }
    Ok(FalsifyOutput {
        result,
        output_dir,
        written,
    })
}

/// Robustness of a formula on a CSV trace at its first sample.
pub fn robustness_of(formula: &str, trace_csv: &str) -> Result<f64, CliError> {
    let phi = parse_stl(formula)?;
    let trace = Trace::read_csv(trace_csv)?;
    Ok(robustness(&phi, &trace)?.value())
}

/// Search space and compiled oracles of a suite, at nominal parameter
/// values and exact step durations.
pub fn compile_suite(suite_text: &str) -> Result<String, CliError> {
    let suite = parse_testsuite(suite_text)?;
    let space = suite.sequence.search_space();
    let mut out = String::new();
    let width = space
        .names
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("parameter".len());
    writeln!(
        out,
        "{:<width$}  {:>12}  {:>12}  {:>12}",
        "parameter", "lower", "upper", "nominal"
    )
    .unwrap();
    for i in 0..space.dim() {
        writeln!(
            out,
            "{:<width$}  {:>12}  {:>12}  {:>12}",
            space.names[i],
            format_significant(space.lower[i], 12),
            format_significant(space.upper[i], 12),
            format_significant(space.nominal[i], 12)
        )
        .unwrap();
    }
    let timeline = suite.sequence.timeline(&space.nominal, None)?;
    writeln!(out, "inputs: {}", suite.sequence.inputs().join(", ")).unwrap();
    writeln!(
        out,
        "steps: {}, nominal duration {} s",
        suite.sequence.steps().len(),
        format_significant(timeline.total(), 12)
    )
    .unwrap();
    if !suite.assessment.is_empty() {
        writeln!(
            out,
            "assessment: {}",
            compile_assessment(&suite.assessment, &timeline)?
        )
        .unwrap();
    }
    if let Some(table) = &suite.table {
        writeln!(out, "table: {}", compile_table(table, timeline.total())?).unwrap();
    }
    Ok(out)
}

/// One block per registered plant.
pub fn plants_listing(registry: &PlantRegistry) -> String {
    let mut out = String::new();
    for p in registry.plants() {
        writeln!(out, "{}: {}", p.name(), p.description()).unwrap();
        writeln!(out, "  inputs: {}", p.inputs().join(", ")).unwrap();
        writeln!(out, "  outputs: {}", p.outputs().join(", ")).unwrap();
        writeln!(out, "  default dt: {} s", p.default_dt()).unwrap();
        let constants: Vec<String> = p
            .constants()
            .iter()
            .map(|(n, v)| format!("{n} = {v}"))
            .collect();
        writeln!(out, "  constants: {}", constants.join(", ")).unwrap();
    }
    out
}

/// Reads a formula from `text` or, when given, a file.
pub fn formula_text(text: Option<&str>, file: Option<&Path>) -> Result<String, CliError> {
    match (text, file) {
        (Some(t), None) => Ok(t.to_string()),
        (None, Some(f)) => read_file(f),
        _ => Err(CliError::Invalid(
            "give exactly one of a formula or a formula file".into(),
        )),
    }
}
