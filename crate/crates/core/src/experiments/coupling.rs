use rand::Rng;

use crate::bessel::SdeConfig;
use crate::error::Result;
use crate::sampler::{coupled_pair, TestSet};
use crate::stats::{log_survival, weighted_polyfit};

use super::{par_collect, Check, Comparison, ExperimentConfig, ExperimentOutput, ReportBuilder, Statistic};

const BOOTSTRAP: usize = 200;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

/// Coupled `μ_r`, `μ_s` pairs with `s - r = ε` centred at 1/2: for each `ε`
/// the sup distance between the two maps on the test set, its scaling
/// constant `max d / ε`, and the frequency of distances above `ε^{5/4}`.
pub fn coupling_rate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.params()?;
    let th = &cfg.thresholds;
    let sde = SdeConfig::new(cfg.dt);
    let ts = TestSet::new(p.a);
    let root = cfg.seeds().derive_str("coupling");
    let mut rb = ReportBuilder::new("coupling");
    let mut eps = cfg.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let nf = cfg.n as f64;

    let mut consts = Vec::new();
    let mut tail = Vec::new();
    let mut kept = Vec::new();
    for (j, &e) in eps.iter().enumerate() {
        let seeds = root.derive(j as u64);
        let (r, s) = (0.5 - e / 2.0, 0.5 + e / 2.0);
        let pairs = par_collect(cfg.n, |i| coupled_pair(&p, cfg.x, r, s, &sde, &seeds.derive(i), &ts))?;
        rb.count(2 * cfg.n);
        let mut d: Vec<f64> = pairs.iter().map(|c| c.tilde.sup_distance(&c.plain)).collect();
        let gaps: Vec<f64> = pairs.iter().map(|c| c.endpoint_gap).collect();
        if j == 0 {
            for (i, c) in pairs.into_iter().enumerate() {
                for mut m in [c.plain, c.tilde] {
                    m.meta.index = i as u64;
                    m.extras = vec![e, c.endpoint_gap];
                    kept.push(m);
                }
            }
        }
        d.sort_by(f64::total_cmp);
        let max = *d.last().unwrap();
        let c = max / e;
        let mut rng = seeds.rng(u64::MAX);
        let levels = [0.5, 0.9, 0.99, 1.0];
        let mut boot = vec![Vec::with_capacity(BOOTSTRAP); levels.len()];
        let mut resample = vec![0.0; cfg.n];
        for _ in 0..BOOTSTRAP {
            resample.iter_mut().for_each(|v| *v = d[rng.random_range(0..cfg.n)]);
            resample.sort_by(f64::total_cmp);
            for (b, &q) in boot.iter_mut().zip(&levels) {
                b.push(quantile(&resample, q));
            }
        }
        let se = |b: &[f64]| {
            let m = b.iter().sum::<f64>() / b.len() as f64;
            (b.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b.len() - 1) as f64).sqrt()
        };
        for (b, &q) in boot.iter().zip(&levels[..3]) {
            rb.stat(Statistic::with_se(format!("q{}[{e}]", (q * 100.0) as u32), quantile(&d, q), se(b)));
        }
        let max_se = se(&boot[3]);
        rb.stat(Statistic::with_se(format!("max_distance[{e}]"), max, max_se));
        rb.stat(Statistic::with_se(format!("fit_c[{e}]"), c, max_se / e));
        let thr = e.powf(1.25);
        let k = d.iter().filter(|&&x| x >= thr).count();
        let pk = k as f64 / nf;
        rb.stat(Statistic::with_se(format!("p_exceed[{e}]"), pk, (pk * (1.0 - pk) / nf).sqrt()));
        let bound = e.sqrt() * (1.0 / e).ln();
        let v = gaps.iter().filter(|&&g| g > bound).count() as f64 / nf;
        rb.stat(Statistic::with_se(format!("endpoint_gap_exceed[{e}]"), v, (v * (1.0 - v) / nf).sqrt()));
        consts.push(c);
        tail.push((e, k));
    }

    let growth = consts.iter().cloned().fold(0.0, f64::max) / consts[0];
    rb.check(Check::new("c_growth", growth, Comparison::AtMost, th.coupling_growth));

    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for &(e, k) in &tail {
        if let Some((y, w)) = log_survival(k, cfg.n) {
            xs.push((1.0 / e).ln());
            ys.push(y);
            ws.push(w);
        }
    }
    let slope = match weighted_polyfit(&xs, &ys, &ws, 1) {
        Ok(fit) => {
            let (_, hi) = fit.interval(1);
            rb.stat(Statistic::with_se("exceed_slope", fit.coefficients[1], fit.std_errors[1]));
            hi
        }
        Err(_) => f64::NAN,
    };
    rb.stat(Statistic::with_se("exceed_nonzero_levels", xs.len() as f64, 0.0));
    rb.check(Check::new("exceed_slope_upper", slope, Comparison::Less, th.coupling_tail_slope));

    Ok(ExperimentOutput {
        report: rb.finish(cfg),
        samples: kept,
        extra_names: vec!["eps".into(), "endpoint_gap".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_report_shape() {
        let cfg = ExperimentConfig {
            dt: 1e-2,
            n: 30,
            eps: vec![0.2, 0.1],
            ..ExperimentConfig::default()
        };
        let out = coupling_rate_experiment(&cfg).unwrap();
        assert_eq!(out.samples.len(), 60);
        assert!(out.report.statistic("fit_c[0.1]").is_some());
        assert!(out.report.verdict.check("c_growth").is_some());
    }
}
