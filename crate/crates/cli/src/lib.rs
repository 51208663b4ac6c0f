//! Configuration, output files and the run loop behind the `slerev` binary.

use std::path::PathBuf;

use slerev::experiments::{robustness_check, run_experiment, ExperimentReport};
use thiserror::Error;

pub mod config;
pub mod output;

pub use config::{RunConfig, OUTPUT_DIR_ENV};
pub use output::{csv_header, emit_csv, write_report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: expected `key = value`, got `{text}`")]
    Syntax {
        source_name: String,
        line: usize,
        text: String,
    },
    #[error("unknown setting `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("empty sample batch")]
    EmptyBatch,
    #[error(transparent)]
    Experiment(#[from] slerev::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

/// Exit codes of [`run`].
pub const EXIT_PASS: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAIL: u8 = 2;

/// Files written by a run and the overall verdict.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Runs the configured experiment and writes its outputs. Validation happens
/// before any sampling.
pub fn run(rc: &RunConfig) -> Result<RunOutcome, CliError> {
    rc.validate()?;
    let pool = {
        let b = rayon::ThreadPoolBuilder::new();
        match rc.threads {
            Some(n) => b.num_threads(n),
            None => b,
        }
        .build()?
    };
    pool.install(|| {
        let name = rc.experiment.name();
        let out = run_experiment(rc.experiment, &rc.experiment_config)?;
        let mut files = vec![write_report(&out.report, &rc.output_dir, name)?];
        if rc.write_samples && !out.samples.is_empty() {
            let path = rc.output_dir.join(format!("{name}.samples.csv"));
            emit_csv(&out.samples, &out.extra_names, &path)?;
            files.push(path);
        }
        let mut passed = out.report.verdict.passed;
        if rc.robustness {
            let (cmp, _, _) = robustness_check(rc.experiment, &rc.experiment_config)?;
            files.push(write_report(&cmp, &rc.output_dir, &format!("{name}.robustness"))?);
            passed &= cmp.verdict.passed;
        }
        Ok(RunOutcome {
            report: out.report,
            passed,
            files,
        })
    })
}
