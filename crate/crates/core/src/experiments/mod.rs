//! Monte Carlo experiments and their reports.
//!
//! Every experiment is a pure function of an [`ExperimentConfig`]: per-sample
//! random streams are derived from the master seed by index, so reports are
//! reproducible regardless of thread count.

mod bessel_checks;
mod commutation;
mod coupling;
mod density;
mod maps;
mod robustness;
mod tails;

pub use bessel_checks::{bridge_marginal_check, martingale_check, passage_time_check, MartingaleCheck};
pub use commutation::{commutation_experiment, commutation_weight, CommutationWeight};
pub use coupling::coupling_rate_experiment;
pub use density::density_check;
pub use maps::{mu_r_constancy_experiment, musharp_batch, reversibility_experiment, sample_experiment};
pub use robustness::{compare_reports, halved, robustness_check};
pub use tails::bessel_tail_experiments;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::Params;
use crate::error::{Error, Result};
use crate::noise::SeedStream;
use crate::sampler::MapSample;

/// Declared pass/fail thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Two-sample tests pass when `p > alpha`.
    pub alpha: f64,
    /// Power checks pass when `p < power_alpha`.
    pub power_alpha: f64,
    /// Fraction of repetitions that must pass (reversibility, `μ_r`).
    pub min_pass_fraction: f64,
    /// Fraction of repetitions that must pass for commutation (strictly more).
    pub majority_fraction: f64,
    pub ks_max: f64,
    /// Monte Carlo means must lie within this many standard errors.
    pub se_multiple: f64,
    pub normalization_tol: f64,
    pub mass_tol: f64,
    pub reduction_tol: f64,
    /// Gaussian tail: slope of log-survival in `r²` must be at most
    /// `gaussian_slope + gaussian_slope_tol`.
    pub gaussian_slope: f64,
    pub gaussian_slope_tol: f64,
    /// Largest allowed growth of the fitted coupling constant as `ε` shrinks.
    pub coupling_growth: f64,
    /// Required slope of log-probability against `log(1/ε)`.
    pub coupling_tail_slope: f64,
    /// Largest discrepancy between the two ways of removing both curves.
    pub agreement_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            power_alpha: 0.01,
            min_pass_fraction: 0.7,
            majority_fraction: 0.5,
            ks_max: 0.02,
            se_multiple: 3.0,
            normalization_tol: 1e-6,
            mass_tol: 1e-5,
            reduction_tol: 1e-8,
            gaussian_slope: -0.25,
            gaussian_slope_tol: 0.05,
            coupling_growth: 2.0,
            coupling_tail_slope: -1.0,
            agreement_tol: 0.05,
        }
    }
}

impl Thresholds {
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "alpha" => &mut self.alpha,
            "power_alpha" => &mut self.power_alpha,
            "min_pass_fraction" => &mut self.min_pass_fraction,
            "majority_fraction" => &mut self.majority_fraction,
            "ks_max" => &mut self.ks_max,
            "se_multiple" => &mut self.se_multiple,
            "normalization_tol" => &mut self.normalization_tol,
            "mass_tol" => &mut self.mass_tol,
            "reduction_tol" => &mut self.reduction_tol,
            "gaussian_slope" => &mut self.gaussian_slope,
            "gaussian_slope_tol" => &mut self.gaussian_slope_tol,
            "coupling_growth" => &mut self.coupling_growth,
            "coupling_tail_slope" => &mut self.coupling_tail_slope,
            "agreement_tol" => &mut self.agreement_tol,
            _ => return Err(Error::Config(format!("unknown threshold `{key}`"))),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    Reversibility,
    MuR,
    Coupling,
    Tails,
    Commutation,
    DensityCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Sample,
        Self::Reversibility,
        Self::MuR,
        Self::Coupling,
        Self::Tails,
        Self::Commutation,
        Self::DensityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sample => "sample",
            Self::Reversibility => "reversibility",
            Self::MuR => "mu-r",
            Self::Coupling => "coupling",
            Self::Tails => "tails",
            Self::Commutation => "commutation",
            Self::DensityCheck => "density-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Everything an experiment needs; echoed into its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kappa: f64,
    pub x: f64,
    pub t0: f64,
    pub dt: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    /// Independent repetitions for the seed-majority criteria.
    pub repetitions: usize,
    pub permutations: usize,
    /// `r` values for the `μ_r` experiment.
    pub rs: Vec<f64>,
    /// `ε` values for the coupling and tail experiments.
    pub eps: Vec<f64>,
    /// Capacity times of the two curves in the commutation experiment.
    pub r1: f64,
    pub r2: f64,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kappa: 4.0,
            x: 1.0,
            t0: 1.0,
            dt: 1e-4,
            n: 2000,
            seed: 0,
            repetitions: 10,
            permutations: 500,
            rs: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            eps: vec![0.2, 0.1, 0.05, 0.025],
            r1: 0.25,
            r2: 0.25,
            thresholds: Thresholds::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<Params<f64>> {
        Params::new(self.kappa)
    }

    /// Checks shared by every experiment; experiment-specific constraints are
    /// checked in [`ExperimentConfig::validate_for`].
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.kappa > 0.0 && self.kappa < 8.0) {
            return Err(Error::Config(format!("kappa must lie in (0, 8), got {}", self.kappa)));
        }
        positive("x", self.x)?;
        positive("t0", self.t0)?;
        positive("dt", self.dt)?;
        if self.dt >= self.t0 {
            return Err(Error::Config(format!("dt = {} must be smaller than t0 = {}", self.dt, self.t0)));
        }
        if self.n == 0 {
            return Err(Error::Config("N must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, kind: ExperimentKind) -> Result<()> {
        self.validate()?;
        let simple = || {
            if self.kappa > 4.0 {
                Err(Error::Config(format!("{kind} requires kappa <= 4, got {}", self.kappa)))
            } else {
                Ok(())
            }
        };
        match kind {
            ExperimentKind::Reversibility | ExperimentKind::Sample => simple(),
            ExperimentKind::MuR => {
                simple()?;
                if self.rs.is_empty() || self.rs.iter().any(|r| !(0.0..=1.0).contains(r)) {
                    return Err(Error::Config("rs must be a nonempty list in [0, 1]".into()));
                }
                Ok(())
            }
            ExperimentKind::Coupling => {
                simple()?;
                if self.eps.len() < 2 || self.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    return Err(Error::Config("eps must list at least two values in (0, 1)".into()));
                }
                Ok(())
            }
            ExperimentKind::Tails => {
                if self.eps.len() < 3 || self.eps.iter().any(|e| !(*e > 0.0 && *e < self.t0)) {
                    return Err(Error::Config("eps must list at least three values in (0, t0)".into()));
                }
                Ok(())
            }
            ExperimentKind::Commutation => {
                let p = self.params()?;
                if p.central_charge.abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "commutation requires kappa = 8/3 (zero central charge), got {}",
                        self.kappa
                    )));
                }
                if !(self.r1 > 0.0 && self.r2 > 0.0 && self.r1 + self.r2 < self.t0) {
                    return Err(Error::Config(format!(
                        "commutation requires r1, r2 > 0 and r1 + r2 < t0, got {}, {}",
                        self.r1, self.r2
                    )));
                }
                Ok(())
            }
            ExperimentKind::DensityCheck => Ok(()),
        }
    }

    pub fn seeds(&self) -> SeedStream {
        SeedStream::new(self.seed)
    }
}

/// A reported number with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    /// Monte Carlo or numerical standard error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// Permutation count for permutation p-values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
}

impl Statistic {
    pub fn with_se(name: impl Into<String>, value: f64, se: f64) -> Self {
        Self {
            name: name.into(),
            value,
            std_error: Some(se),
            permutations: None,
        }
    }

    /// A permutation-test quantity (statistic or p-value).
    pub fn permutation(name: impl Into<String>, value: f64, permutations: usize) -> Self {
        Self {
            name: name.into(),
            value,
            std_error: None,
            permutations: Some(permutations),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Comparison {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Self::Less => value < threshold,
            Self::AtMost => value <= threshold,
            Self::Greater => value > threshold,
            Self::AtLeast => value >= threshold,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Less => "<",
            Self::AtMost => "<=",
            Self::Greater => ">",
            Self::AtLeast => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison,
            threshold,
            passed: comparison.holds(value, threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn from_checks(checks: Vec<Check>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplesMeta {
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    pub master_seed: u64,
    pub repetitions: usize,
    /// Total number of sampled paths or maps.
    pub total_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub params: ExperimentConfig,
    pub statistics: Vec<Statistic>,
    pub samples_meta: SamplesMeta,
    pub verdict: Verdict,
}

impl ExperimentReport {
    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }
}

/// A report together with the raw batch it was computed from.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub samples: Vec<MapSample<f64>>,
    /// Column names for [`MapSample::extras`].
    pub extra_names: Vec<String>,
}

pub(crate) struct ReportBuilder {
    name: String,
    statistics: Vec<Statistic>,
    checks: Vec<Check>,
    total_samples: usize,
}

impl ReportBuilder {
    pub(crate) fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            statistics: Vec::new(),
            checks: Vec::new(),
            total_samples: 0,
        }
    }

    pub(crate) fn stat(&mut self, s: Statistic) {
        self.statistics.push(s);
    }

    pub(crate) fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub(crate) fn count(&mut self, n: usize) {
        self.total_samples += n;
    }

    pub(crate) fn finish(self, cfg: &ExperimentConfig) -> ExperimentReport {
        ExperimentReport {
            name: self.name,
            params: cfg.clone(),
            statistics: self.statistics,
            samples_meta: SamplesMeta {
                n: cfg.n,
                dt: cfg.dt,
                master_seed: cfg.seed,
                repetitions: cfg.repetitions,
                total_samples: self.total_samples,
            },
            verdict: Verdict::from_checks(self.checks),
        }
    }
}

/// Runs `f(i)` for `i in 0..n` in parallel, keeping index order.
pub(crate) fn par_collect<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(f).collect()
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate_for(kind)?;
    match kind {
        ExperimentKind::Sample => sample_experiment(cfg),
        ExperimentKind::Reversibility => reversibility_experiment(cfg),
        ExperimentKind::MuR => mu_r_constancy_experiment(cfg),
        ExperimentKind::Coupling => coupling_rate_experiment(cfg),
        ExperimentKind::Tails => bessel_tail_experiments(cfg),
        ExperimentKind::Commutation => commutation_experiment(cfg),
        ExperimentKind::DensityCheck => density_check(cfg),
    }
}

/// Number of repetitions with `p > alpha`.
pub(crate) fn count_passes(ps: &[f64], alpha: f64) -> usize {
    ps.iter().filter(|&&p| p > alpha).count()
}

pub(crate) fn no_samples(report: ExperimentReport) -> ExperimentOutput {
    ExperimentOutput {
        report,
        samples: Vec::new(),
        extra_names: Vec::new(),
    }
}
