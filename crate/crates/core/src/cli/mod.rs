//! Command implementations behind the `falsify` binary. The binary only
//! parses arguments, prints what these functions return and maps errors to
//! exit codes.

mod campaign;
mod commands;
mod config;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::fitness::FitnessError;
use crate::plants::PlantError;
use crate::search::SearchError;
use crate::stl::StlError;
use crate::testseq::TestSeqError;
use crate::trace::TraceError;

pub use campaign::{
    load_campaign, median_evaluations, run_campaign, write_campaign, BaseConfig, CampaignConfig,
    CampaignReport, CampaignRow, Sweep, SweepSummary,
};
pub use commands::{
    compile_suite, env_seed, falsify, formula_text, plants_listing, result_document, robustness_of,
    FalsifyOptions, FalsifyOutput, SEED_ENV,
};
pub use config::{load_run_config, RequirementSource, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    TestSuite { path: PathBuf, source: TestSeqError },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    TestSeq(#[from] TestSeqError),
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Formats like C's `%.{digits}g`: fixed notation for decimal exponents in
/// `[-4, digits)`, scientific otherwise, trailing zeros removed.
pub fn format_significant(value: f64, digits: usize) -> String {
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".into()
        } else if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if value == 0.0 {
        return if value.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    } else {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        trim_zeros(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
