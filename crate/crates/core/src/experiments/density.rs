use std::f64::consts::PI;

use crate::bessel::{
    bridge_density, first_passage_cdf, first_passage_density, transition_density_killed, Params,
};
use crate::error::Result;
use crate::quad::{integrate, integrate_to_infinity, QuadResult, Tolerance};

use super::{no_samples, Check, Comparison, ExperimentConfig, ExperimentOutput, ReportBuilder, Statistic};

fn tight() -> Tolerance<f64> {
    Tolerance {
        abs: 1e-13,
        rel: 1e-11,
        max_intervals: 5000,
    }
}

/// Largest residual over a list of quadratures, with the matching error bound.
fn worst(rs: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    rs.into_iter().fold((0.0, 0.0), |(r, e), (ri, ei)| if ri > r { (ri, ei) } else { (r, e.max(ei)) })
}

fn residual(q: QuadResult<f64>, target: f64) -> (f64, f64) {
    ((q.value - target).abs(), q.error)
}

/// Deterministic checks of the closed-form densities: normalisation of the
/// hitting-time density, conservation of mass for the killed process, the
/// reductions at `a = 1/2`, and total mass of the bridge marginal.
pub fn density_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let th = &cfg.thresholds;
    let mut rb = ReportBuilder::new("density-check");
    let own = cfg.params()?;
    let mut a_values = vec![0.5, 0.6, 0.75, 1.0];
    if !a_values.contains(&own.a) && own.bessel_index() > 0.0 {
        a_values.push(own.a);
    }

    let mut norm = Vec::new();
    let mut mass = Vec::new();
    for &a in &a_values {
        let p = Params::new(2.0 / a)?;
        for x in [0.5, cfg.x, 2.0] {
            let q = integrate_to_infinity(|t| first_passage_density(&p, x, t, true).unwrap_or(0.0), 0.0, tight());
            norm.push(residual(q, 1.0));
        }
        for t in [0.3, cfg.t0, 2.0] {
            let x = cfg.x;
            let hi = x + 40.0 * t.sqrt();
            let alive = integrate(|y| transition_density_killed(&p, t, x, y).unwrap_or(0.0), 0.0, hi, tight());
            let dead = first_passage_cdf(&p, x, t)?;
            mass.push(((alive.value + dead - 1.0).abs(), alive.error));
        }
    }
    let (norm_r, norm_e) = worst(norm);
    let (mass_r, mass_e) = worst(mass);
    rb.stat(Statistic::with_se("normalization_residual", norm_r, norm_e));
    rb.stat(Statistic::with_se("mass_residual", mass_r, mass_e));
    rb.check(Check::new("normalization_residual", norm_r, Comparison::Less, th.normalization_tol));
    rb.check(Check::new("mass_residual", mass_r, Comparison::Less, th.mass_tol));

    let half = Params::new(4.0)?;
    let mut reduction: f64 = 0.0;
    for &(x, t) in &[(0.3, 0.05), (1.0, 1.0), (1.0, 2.5), (2.0, 0.7), (0.1, 10.0)] {
        let levy = x * f64::powf(t, -1.5) * (-x * x / (2.0 * t)).exp() / (2.0 * PI).sqrt();
        let got = first_passage_density(&half, x, t, true)?;
        reduction = reduction.max((got - levy).abs() / levy.max(1.0));
        let g = |d: f64| (-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
        for y in [0.2 * x, x, 3.0 * x] {
            let want = g(y - x) - g(y + x);
            let got = transition_density_killed(&half, t, x, y)?;
            reduction = reduction.max((got - want).abs() / want.max(1.0));
        }
    }
    rb.stat(Statistic::with_se("half_reduction_error", reduction, 0.0));
    rb.check(Check::new("half_reduction_error", reduction, Comparison::Less, th.reduction_tol));

    let mut bridge = Vec::new();
    for s in [0.1, 0.5, 0.9] {
        let t = s * cfg.t0;
        let hi = cfg.x + 40.0 * cfg.t0.sqrt();
        let q = integrate(|y| bridge_density(&own, t, cfg.x, y, cfg.t0).unwrap_or(0.0), 0.0, hi, tight());
        bridge.push(residual(q, 1.0));
    }
    let (bridge_r, bridge_e) = worst(bridge);
    rb.stat(Statistic::with_se("bridge_mass_residual", bridge_r, bridge_e));
    rb.check(Check::new("bridge_mass_residual", bridge_r, Comparison::Less, th.mass_tol));

    Ok(no_samples(rb.finish(cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_check_passes_for_default_config() {
        let out = density_check(&ExperimentConfig::default()).unwrap();
        assert!(out.report.verdict.passed, "{:?}", out.report.verdict);
        assert!(out.samples.is_empty());
    }
}
