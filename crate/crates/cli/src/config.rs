//! Run configuration: a key-value file overridden by command-line flags.

use std::path::{Path, PathBuf};

use slerev::experiments::{ExperimentConfig, ExperimentKind};

use crate::CliError;

/// Environment variable overriding the output directory.
pub const OUTPUT_DIR_ENV: &str = "SLEREV_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub experiment_config: ExperimentConfig,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub write_samples: bool,
    /// Rerun at half the step and compare.
    pub robustness: bool,
}

impl RunConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            experiment_config: ExperimentConfig::default(),
            output_dir: PathBuf::from("."),
            threads: None,
            write_samples: true,
            robustness: false,
        }
    }

    /// Applies one `key = value` setting. Threshold names are accepted bare
    /// or with a `thresholds.` prefix.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let cfg = &mut self.experiment_config;
        let bad = |e: String| CliError::Value {
            key: key.to_string(),
            value: value.to_string(),
            reason: e,
        };
        let real = || value.parse::<f64>().map_err(|e| bad(e.to_string()));
        let count = || value.parse::<usize>().map_err(|e| bad(e.to_string()));
        let list = || {
            value
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(e.to_string()))
        };
        match key {
            "experiment" => self.experiment = value.parse().map_err(|e: slerev::Error| bad(e.to_string()))?,
            "kappa" => cfg.kappa = real()?,
            "x" => cfg.x = real()?,
            "t0" => cfg.t0 = real()?,
            "dt" => cfg.dt = real()?,
            "N" | "n" => cfg.n = count()?,
            "seed" => cfg.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "repetitions" => cfg.repetitions = count()?,
            "permutations" => cfg.permutations = count()?,
            "rs" => cfg.rs = list()?,
            "eps" => cfg.eps = list()?,
            "r1" => cfg.r1 = real()?,
            "r2" => cfg.r2 = real()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "threads" => self.threads = Some(count()?),
            "samples" => self.write_samples = value.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?,
            "robustness" => self.robustness = value.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?,
            other => {
                let name = other.strip_prefix("thresholds.").unwrap_or(other);
                let v = real()?;
                cfg.thresholds.set(name, v).map_err(|_| CliError::UnknownKey(key.to_string()))?;
            }
        }
        Ok(())
    }

    /// Applies every setting of a key-value text: one `key = value` per line,
    /// `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Syntax {
                source_name: source.to_string(),
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Replaces the output directory when the environment variable is set.
    pub fn apply_env(&mut self, value: Option<String>) {
        if let Some(dir) = value.filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.threads == Some(0) {
            return Err(CliError::Invalid("threads must be positive".into()));
        }
        self.experiment_config
            .validate_for(self.experiment)
            .map_err(|e| CliError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_settings_and_thresholds() {
        let mut rc = RunConfig::new(ExperimentKind::Sample);
        let text = "# comment\nexperiment = tails\nkappa = 3\nN=50\neps = 0.2, 0.1,0.05\nalpha = 0.05\nthresholds.mass_tol = 1e-7\n";
        rc.apply_text(text, "test").unwrap();
        assert_eq!(rc.experiment, ExperimentKind::Tails);
        assert_eq!(rc.experiment_config.kappa, 3.0);
        assert_eq!(rc.experiment_config.n, 50);
        assert_eq!(rc.experiment_config.eps, vec![0.2, 0.1, 0.05]);
        assert_eq!(rc.experiment_config.thresholds.alpha, 0.05);
        assert_eq!(rc.experiment_config.thresholds.mass_tol, 1e-7);
    }

    #[test]
    fn bad_lines_are_reported() {
        let mut rc = RunConfig::new(ExperimentKind::Sample);
        assert!(matches!(rc.apply_text("kappa 3", "f"), Err(CliError::Syntax { line: 1, .. })));
        assert!(matches!(rc.set("colour", "1"), Err(CliError::UnknownKey(_))));
        assert!(matches!(rc.set("kappa", "four"), Err(CliError::Value { .. })));
    }

    #[test]
    fn env_overrides_output_dir_only() {
        let mut rc = RunConfig::new(ExperimentKind::Sample);
        rc.set("kappa", "2").unwrap();
        rc.apply_env(Some("/tmp/out".into()));
        assert_eq!(rc.output_dir, PathBuf::from("/tmp/out"));
        assert_eq!(rc.experiment_config.kappa, 2.0);
        rc.apply_env(None);
        assert_eq!(rc.output_dir, PathBuf::from("/tmp/out"));
    }

    #[test]
    fn commutation_needs_zero_central_charge() {
        let mut rc = RunConfig::new(ExperimentKind::Commutation);
        rc.set("kappa", "4").unwrap();
        assert!(rc.validate().is_err());
        rc.set("kappa", &(8.0f64 / 3.0).to_string()).unwrap();
        rc.validate().unwrap();
    }
}
