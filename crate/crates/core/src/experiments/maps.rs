use crate::bessel::{Params, SdeConfig};
use crate::error::Result;
use crate::noise::SeedStream;
use crate::sampler::{sample_mu_r, sample_musharp, MapSample, TestSet};
use crate::stats::{energy_test, ks_two_sample, mean_se, EnergyOptions, EnergyTest};

use super::{
    count_passes, par_collect, Check, Comparison, ExperimentConfig, ExperimentOutput, ReportBuilder, Statistic,
};

/// `n` independent maps of SLE from `x1` to `x2` with duration `t0`.
#[allow(clippy::too_many_arguments)]
pub fn musharp_batch(
    p: &Params<f64>,
    x1: f64,
    x2: f64,
    t0: f64,
    cfg: &SdeConfig<f64>,
    driving_scale: f64,
    seeds: &SeedStream,
    n: usize,
) -> Result<Vec<MapSample<f64>>> {
    let ts = TestSet::new(p.a);
    par_collect(n, |i| Ok(sample_musharp(p, x1, x2, t0, cfg, driving_scale, seeds.brownian(i), &ts)?.with_index(i)))
}

fn features(batch: &[MapSample<f64>]) -> Vec<Vec<f64>> {
    batch.iter().map(MapSample::flatten).collect()
}

fn energy(a: &[MapSample<f64>], b: &[MapSample<f64>], cfg: &ExperimentConfig, seeds: &SeedStream) -> Result<EnergyTest> {
    let opts = EnergyOptions {
        permutations: cfg.permutations,
        standardize: false,
    };
    energy_test(&features(a), &features(b), opts, &mut seeds.rng(0))
}

/// Smallest per-coordinate two-sample KS p-value, Bonferroni-adjusted.
fn min_ks_p(a: &[MapSample<f64>], b: &[MapSample<f64>]) -> Result<f64> {
    let (fa, fb) = (features(a), features(b));
    let d = fa[0].len();
    let mut best: f64 = 1.0;
    for k in 0..d {
        let ca: Vec<f64> = fa.iter().map(|v| v[k]).collect();
        let cb: Vec<f64> = fb.iter().map(|v| v[k]).collect();
        best = best.min(ks_two_sample(&ca, &cb)?.p_value);
    }
    Ok((best * d as f64).min(1.0))
}

/// A single batch of `μ#(0, x; t0)` maps.
pub fn sample_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.params()?;
    let sde = SdeConfig::new(cfg.dt);
    let batch = musharp_batch(&p, 0.0, cfg.x, cfg.t0, &sde, 1.0, &cfg.seeds().derive_str("sample"), cfg.n)?;
    let mut rb = ReportBuilder::new("sample");
    rb.count(batch.len());
    let center_re: Vec<f64> = batch.iter().map(|s| s.values[0].re).collect();
    let center_im: Vec<f64> = batch.iter().map(|s| s.values[0].im).collect();
    let (m, se) = mean_se(&center_re);
    rb.stat(Statistic::with_se("center_image_re_mean", m, se));
    let (m, se) = mean_se(&center_im);
    rb.stat(Statistic::with_se("center_image_im_mean", m, se));
    let min_im = batch
        .iter()
        .flat_map(|s| s.values.iter().map(|z| z.im))
        .fold(f64::INFINITY, f64::min);
    rb.stat(Statistic::with_se("min_image_im", min_im, 0.0));
    rb.check(Check::new("min_image_im", min_im, Comparison::Greater, 0.0));
    Ok(ExperimentOutput {
        report: rb.finish(cfg),
        samples: batch,
        extra_names: Vec::new(),
    })
}

/// Compares `μ#(0, x; t0)` with `μ#(x, 0; t0)` in each repetition, plus two
/// deliberately wrong samplers that the test must reject.
pub fn reversibility_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.params()?;
    let th = &cfg.thresholds;
    let sde = SdeConfig::new(cfg.dt);
    let root = cfg.seeds().derive_str("reversibility");
    let mut rb = ReportBuilder::new("reversibility");
    let mut ps = Vec::with_capacity(cfg.repetitions);
    let mut kept = Vec::new();
    for rep in 0..cfg.repetitions {
        let seeds = root.derive(rep as u64);
        let fwd = musharp_batch(&p, 0.0, cfg.x, cfg.t0, &sde, 1.0, &seeds.derive_str("forward"), cfg.n)?;
        let bwd = musharp_batch(&p, cfg.x, 0.0, cfg.t0, &sde, 1.0, &seeds.derive_str("backward"), cfg.n)?;
        rb.count(2 * cfg.n);
        let e = energy(&fwd, &bwd, cfg, &seeds)?;
        rb.stat(Statistic::permutation(format!("energy_p[{rep}]"), e.p_value, e.permutations));
        rb.stat(Statistic::permutation(format!("energy_statistic[{rep}]"), e.statistic, e.permutations));
        rb.stat(Statistic::with_se(format!("ks_min_p_adjusted[{rep}]"), min_ks_p(&fwd, &bwd)?, 0.0));
        ps.push(e.p_value);
        if rep == 0 {
            kept.extend(fwd);
            kept.extend(bwd);
        }
    }
    let frac = count_passes(&ps, th.alpha) as f64 / ps.len() as f64;
    rb.check(Check::new("pass_fraction", frac, Comparison::AtLeast, th.min_pass_fraction));

    let fwd = &kept[..cfg.n];
    let power = root.derive_str("power");
    let scaled = musharp_batch(&p, 0.0, cfg.x, cfg.t0, &sde, 1.2, &power.derive_str("scale"), cfg.n)?;
    let drifted = SdeConfig::new(cfg.dt).with_drift_scale(1.1);
    let drifted = musharp_batch(&p, cfg.x, 0.0, cfg.t0, &drifted, 1.0, &power.derive_str("drift"), cfg.n)?;
    rb.count(2 * cfg.n);
    let e = energy(fwd, &scaled, cfg, &power.derive(1))?;
    rb.stat(Statistic::permutation("power_driving_scale_p", e.p_value, e.permutations));
    rb.check(Check::new("power_driving_scale_p", e.p_value, Comparison::Less, th.power_alpha));
    let e = energy(fwd, &drifted, cfg, &power.derive(2))?;
    rb.stat(Statistic::permutation("power_drift_p", e.p_value, e.permutations));
    rb.check(Check::new("power_drift_p", e.p_value, Comparison::Less, th.power_alpha));

    Ok(ExperimentOutput {
        report: rb.finish(cfg),
        samples: kept,
        extra_names: Vec::new(),
    })
}

/// Tests that the law of `μ_r` does not depend on `r`: every pair of `r`
/// values is compared in each repetition.
pub fn mu_r_constancy_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.params()?;
    let th = &cfg.thresholds;
    let sde = SdeConfig::new(cfg.dt);
    let ts = TestSet::new(p.a);
    let root = cfg.seeds().derive_str("mu-r");
    let mut rb = ReportBuilder::new("mu-r");
    let k = cfg.rs.len();
    let mut pair_ps = vec![Vec::new(); k * k];
    let mut kept = Vec::new();
    for rep in 0..cfg.repetitions {
        let seeds = root.derive(rep as u64);
        let mut batches = Vec::with_capacity(k);
        for (j, &r) in cfg.rs.iter().enumerate() {
            let s = seeds.derive(1000 + j as u64);
            let batch = par_collect(cfg.n, |i| Ok(sample_mu_r(&p, cfg.x, r, &sde, &s.derive(i), &ts)?.with_index(i)))?;
            batches.push(batch);
        }
        rb.count(k * cfg.n);
        for i in 0..k {
            for j in i + 1..k {
                let e = energy(&batches[i], &batches[j], cfg, &seeds.derive((i * k + j) as u64))?;
                pair_ps[i * k + j].push(e.p_value);
            }
        }
        if rep == 0 {
            kept = batches.into_iter().flatten().collect();
        }
    }
    let mut worst: f64 = 1.0;
    for i in 0..k {
        for j in i + 1..k {
            let ps = &pair_ps[i * k + j];
            let frac = count_passes(ps, th.alpha) as f64 / ps.len() as f64;
            let (ri, rj) = (cfg.rs[i], cfg.rs[j]);
            rb.stat(Statistic::with_se(format!("pass_fraction[{ri} vs {rj}]"), frac, 0.0));
            let min_p = ps.iter().cloned().fold(1.0, f64::min);
            rb.stat(Statistic::permutation(format!("min_energy_p[{ri} vs {rj}]"), min_p, cfg.permutations));
            worst = worst.min(frac);
        }
    }
    if k < 2 {
        worst = 1.0;
    }
    rb.check(Check::new("min_pair_pass_fraction", worst, Comparison::AtLeast, th.min_pass_fraction));
    Ok(ExperimentOutput {
        report: rb.finish(cfg),
        samples: kept,
        extra_names: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            dt: 1e-2,
            n: 40,
            repetitions: 2,
            permutations: 49,
            rs: vec![0.0, 0.5, 1.0],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sample_experiment_is_deterministic() {
        let a = sample_experiment(&tiny()).unwrap();
        let b = sample_experiment(&tiny()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples.len(), 40);
        assert!(a.report.verdict.passed);
    }

    #[test]
    fn reversibility_report_shape() {
        let out = reversibility_experiment(&tiny()).unwrap();
        let r = &out.report;
        assert!(r.statistic("energy_p[1]").is_some());
        assert!(r.verdict.check("pass_fraction").is_some());
        assert!(r.verdict.check("power_drift_p").is_some());
        assert_eq!(out.samples.len(), 80);
        assert_eq!(r.samples_meta.total_samples, 2 * 80 + 80);
    }

    #[test]
    fn mu_r_report_shape() {
        let out = mu_r_constancy_experiment(&tiny()).unwrap();
        assert_eq!(out.samples.len(), 120);
        assert!(out.report.statistic("pass_fraction[0 vs 0.5]").is_some());
    }
}
