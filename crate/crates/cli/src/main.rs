use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use falsify_core::cli::{
    compile_suite, env_seed, falsify, format_significant, formula_text, load_campaign,
    plants_listing, robustness_of, run_campaign, write_campaign, CliError, FalsifyOptions,
};
use falsify_core::plants::PlantRegistry;
use falsify_core::search::Outcome;

#[derive(Parser)]
#[command(
    name = "falsify",
    version,
    about = "Search-based falsification of simulated plants against STL requirements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search from a JSON run config.
    Falsify {
        config: PathBuf,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed and FALSIFY_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 2 when a counterexample is found.
        #[arg(long)]
        fail_on_falsify: bool,
    },
    /// Run repeated seeded searches, optionally sweeping one setting.
    Campaign {
        config: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the robustness of a requirement on a CSV trace.
    Robustness {
        #[arg(
            long,
            conflicts_with = "formula_file",
            required_unless_present = "formula_file"
        )]
        formula: Option<String>,
        #[arg(long)]
        formula_file: Option<PathBuf>,
        trace: PathBuf,
    },
    /// Show a suite's search space and compiled requirements.
    Compile { suite: PathBuf },
    /// List the built-in plants.
    Plants,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Falsify {
            config,
            out,
            seed,
            fail_on_falsify,
        } => {
            let seed = match seed {
                Some(s) => Some(s),
                None => env_seed()?,
            };
            let output = falsify(
                &config,
                &FalsifyOptions {
                    seed,
                    output_dir: out,
                },
            )?;
            let r = &output.result;
            println!("verdict: {}", r.outcome.label());
            println!("evaluations: {}", r.evaluations);
            if let Some(best) = &r.best {
                println!(
                    "best robustness: {} at eval {}",
                    format_significant(best.report.raw_automatic, 12),
                    best.index
                );
            }
            for path in &output.written {
                println!("wrote {}", path.display());
            }
            if fail_on_falsify && r.outcome == Outcome::Falsified {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Campaign { config, jobs, out } => {
            let (campaign, base) = load_campaign(&config)?;
            let report = run_campaign(&campaign, &base, jobs)?;
            let dir = out.unwrap_or_else(|| campaign.output_path());
            let path = write_campaign(&report, &dir)?;
            print!("{}", report.summary_text());
            println!("wrote {}", path.display());
        }
        Command::Robustness {
            formula,
            formula_file,
            trace,
        } => {
            let text = formula_text(formula.as_deref(), formula_file.as_deref())?;
            let value = robustness_of(&text, &read(&trace)?)?;
            println!("{}", format_significant(value, 12));
        }
        Command::Compile { suite } => {
            let text = read(&suite)?;
            let listing = compile_suite(&text).map_err(|e| match e {
                CliError::TestSeq(source) => CliError::TestSuite {
                    path: suite.clone(),
                    source,
                },
                other => other,
            })?;
            print!("{listing}");
        }
        Command::Plants => print!("{}", plants_listing(&PlantRegistry::builtin())),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
