use crate::bessel::{sample_bridge, BesselPath, SdeConfig};
use crate::error::{Error, Result};
use crate::stats::{log_survival, weighted_polyfit, Fit};

use super::{no_samples, par_collect, Check, Comparison, ExperimentConfig, ExperimentOutput, ReportBuilder, Statistic};

/// Levels whose exceedance count is below this are left out of the fits.
const MIN_COUNT: usize = 10;

/// Grid steps `(x_k, x_{k+1}, h_k)` near the top of a path, in units of `√t0`
/// and `t0`.
struct TopSteps {
    max: f64,
    steps: Vec<(f64, f64, f64)>,
}

/// Steps this far below the grid maximum never cross a level above it with
/// appreciable probability.
const TOP_WINDOW: f64 = 0.5;

impl TopSteps {
    fn new(path: &BesselPath<f64>, scale: f64, t_scale: f64) -> Self {
        let max = path.max_value() / scale;
        let steps = path
            .values
            .windows(2)
            .zip(path.times.windows(2))
            .map(|(x, t)| (x[0] / scale, x[1] / scale, (t[1] - t[0]) / t_scale))
            .filter(|&(a, b, _)| a.max(b) >= max - TOP_WINDOW)
            .collect();
        Self { max, steps }
    }

    /// Probability that the path, interpolated by Brownian bridges between
    /// grid points, reaches `level`.
    fn exceed(&self, level: f64) -> f64 {
        if level <= self.max {
            return 1.0;
        }
        let stay: f64 = self
            .steps
            .iter()
            .map(|&(a, b, h)| 1.0 - (-2.0 * (level - a) * (level - b) / h).exp())
            .product();
        1.0 - stay
    }
}

/// Per-path features, in units of `√t0`.
struct TailFeatures {
    top: TopSteps,
    inverse_integral: f64,
    /// Sup of `|U_t - x1|` for the driving function read off the path.
    excursion: f64,
    /// `X` at `t0 (1 - ε)` for each `ε`.
    late: Vec<f64>,
}

fn value_at(path: &BesselPath<f64>, t: f64) -> f64 {
    let j = path.times.partition_point(|&s| s <= t).clamp(1, path.len() - 1);
    let (t0, t1) = (path.times[j - 1], path.times[j]);
    let (x0, x1) = (path.values[j - 1], path.values[j]);
    x0 + (x1 - x0) * ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)
}

/// Survival curve on `levels`, restricted to levels with enough exceedances
/// and at least one non-exceedance, as `(level, ln S, weight)`.
fn survival(values: &[f64], levels: impl Iterator<Item = f64>) -> Vec<(f64, f64, f64)> {
    let n = values.len();
    levels
        .filter_map(|r| {
            let k = values.iter().filter(|&&v| v >= r).count();
            if k < MIN_COUNT || k == n {
                return None;
            }
            log_survival(k, n).map(|(y, w)| (r, y, w))
        })
        .collect()
}

/// [`log_survival`] for an expected exceedance count; the binomial variance
/// bounds the variance of the conditional-probability estimate.
fn expected_log_survival(k: f64, n: usize) -> Option<(f64, f64)> {
    if k < MIN_COUNT as f64 || k >= n as f64 - 0.5 {
        return None;
    }
    let s = k / n as f64;
    Some((s.ln(), n as f64 * s / (1.0 - s)))
}

fn fit(points: &[(f64, f64, f64)], transform: impl Fn(f64) -> f64, degree: usize) -> Result<Fit> {
    let x: Vec<f64> = points.iter().map(|p| transform(p.0)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w: Vec<f64> = points.iter().map(|p| p.2).collect();
    weighted_polyfit(&x, &y, &w, degree)
        .map_err(|e| Error::Sampling(format!("not enough tail levels with {MIN_COUNT} or more exceedances: {e}")))
}

fn report_fit(rb: &mut ReportBuilder, name: &str, f: &Fit, k: usize) -> (f64, f64) {
    rb.stat(Statistic::with_se(format!("fit_{name}"), f.coefficients[k], f.std_errors[k]));
    let (lo, hi) = f.interval(k);
    rb.stat(Statistic::with_se(format!("{name}_ci_low"), lo, f.std_errors[k]));
    rb.stat(Statistic::with_se(format!("{name}_ci_high"), hi, f.std_errors[k]));
    rb.stat(Statistic::with_se(format!("{name}_levels"), f.points as f64, 0.0));
    (lo, hi)
}

/// Tail estimates for the bridge started at `x √t0` and killed at `t0`:
///
/// 1. `P(max X / √t0 >= x + r)` against `r²` (Gaussian decay, slope at most
///    about `-1/4`). The maximum between grid points is accounted for by
///    averaging the Brownian-bridge crossing probability instead of counting
///    grid exceedances.
/// 2. `P(∫ ds/X >= r √t0)` against `r` (exponential decay).
/// 3. `P(X_{t0(1-ε)} / √t0 >= √ε ln(1/ε))` against `ln(1/ε)`, quadratic fit
///    with negative curvature (faster than any power).
/// 4. `P(max |U_t - x1| >= √t0 (x + r²))` for the driving function from
///    `x1 = 0` to `x2 = x √t0`, against `r`.
pub fn bessel_tail_experiments(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.params()?;
    if p.bessel_index() <= 0.0 {
        return Err(Error::Config(format!("tails require a > 1/4, got {}", p.a)));
    }
    let th = &cfg.thresholds;
    let sde = SdeConfig::new(cfg.dt);
    let seeds = cfg.seeds().derive_str("tails");
    let st0 = cfg.t0.sqrt();
    let x0 = cfg.x * st0;
    let feats = par_collect(cfg.n, |i| {
        let path = sample_bridge(&p, x0, cfg.t0, &sde, seeds.brownian(i))?;
        let excursion = path
            .drift_integral
            .iter()
            .zip(&path.values)
            .fold(0.0f64, |m, (&int, &x)| m.max((x0 + int - x).abs()));
        Ok(TailFeatures {
            top: TopSteps::new(&path, st0, cfg.t0),
            inverse_integral: path.drift_integral.last().copied().unwrap_or(0.0) / p.a / st0,
            excursion: excursion / st0,
            late: cfg.eps.iter().map(|e| value_at(&path, cfg.t0 * (1.0 - e)) / st0).collect(),
        })
    })?;
    let mut rb = ReportBuilder::new("tails");
    rb.count(cfg.n);
    let grid = |h: f64, n: usize| (0..=n).map(move |k| k as f64 * h);

    let s0 = feats.iter().map(|f| f.top.exceed(cfg.x)).sum::<f64>() / cfg.n as f64;
    rb.stat(Statistic::with_se("max_survival_at_zero", s0, 0.0));
    let pts: Vec<_> = grid(0.25, 40)
        .skip(1)
        .filter_map(|r| {
            let k = feats.iter().map(|f| f.top.exceed(cfg.x + r)).sum::<f64>();
            expected_log_survival(k, cfg.n).map(|(y, w)| (r, y, w))
        })
        .collect();
    let f = fit(&pts, |r| r * r, 1)?;
    let (_, hi) = report_fit(&mut rb, "max_slope", &f, 1);
    let (ln_c, w) = pts
        .iter()
        .map(|&(r, y, w)| (y + r * r / 4.0, w))
        .fold((f64::NEG_INFINITY, 1.0), |a, b| if b.0 > a.0 { b } else { a });
    rb.stat(Statistic::with_se("fit_max_c", ln_c.exp(), ln_c.exp() / w.sqrt()));
    rb.check(Check::new("max_slope_ci_high", hi, Comparison::AtMost, th.gaussian_slope + th.gaussian_slope_tol));
    rb.check(Check::new("max_slope_ci_high_below_zero", hi, Comparison::Less, 0.0));

    let ints: Vec<f64> = feats.iter().map(|f| f.inverse_integral).collect();
    let pts = survival(&ints, grid(0.25, 80).skip(1));
    let f = fit(&pts, |r| r, 1)?;
    let (_, hi) = report_fit(&mut rb, "integral_slope", &f, 1);
    rb.check(Check::new("integral_slope_ci_high", hi, Comparison::Less, 0.0));

    let mut hits = Vec::new();
    for (k, &e) in cfg.eps.iter().enumerate() {
        let level = e.sqrt() * (1.0 / e).ln();
        let count = feats.iter().filter(|f| f.late[k] >= level).count();
        let pk = count as f64 / cfg.n as f64;
        rb.stat(Statistic::with_se(format!("late_exceed[{e}]"), pk, (pk * (1.0 - pk) / cfg.n as f64).sqrt()));
        if let Some((y, w)) = log_survival(count, cfg.n) {
            hits.push(((1.0 / e).ln(), y, w));
        }
    }
    let f = fit(&hits, |l| l, 2)?;
    let (_, hi) = report_fit(&mut rb, "late_curvature", &f, 2);
    rb.check(Check::new("late_curvature_ci_high", hi, Comparison::Less, 0.0));
    let f = fit(&hits, |l| l, 1)?;
    let (_, hi) = report_fit(&mut rb, "late_slope", &f, 1);
    rb.check(Check::new("late_slope_ci_high", hi, Comparison::Less, 0.0));

    let exc: Vec<f64> = feats.iter().map(|f| f.excursion - cfg.x).collect();
    let sq: Vec<f64> = exc.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let pts = survival(&sq, grid(0.1, 60).skip(1));
    let f = fit(&pts, |r| r, 1)?;
    let (_, hi) = report_fit(&mut rb, "driving_slope", &f, 1);
    rb.check(Check::new("driving_slope_ci_high", hi, Comparison::Less, 0.0));

    Ok(no_samples(rb.finish(cfg)))
}
