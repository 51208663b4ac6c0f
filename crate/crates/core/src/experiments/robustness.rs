use crate::error::Result;

use super::{
    run_experiment, Check, Comparison, ExperimentConfig, ExperimentKind, ExperimentReport, ReportBuilder, Statistic,
};

fn is_p_value(s: &Statistic) -> bool {
    s.permutations.is_some() && (s.name.ends_with("_p") || s.name.contains("_p["))
}

/// Reruns `kind` with `dt / 2` and the same seeds. Every p-value must keep its
/// side of `alpha`, every check its outcome, and every fitted constant (a
/// statistic named `fit_*`) must move by less than its standard error at the
/// coarse step.
pub fn robustness_check(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
) -> Result<(ExperimentReport, ExperimentReport, ExperimentReport)> {
    let coarse = run_experiment(kind, cfg)?.report;
    let fine = run_experiment(kind, &halved(cfg))?.report;
    Ok((compare_reports(&coarse, &fine), coarse, fine))
}

/// `cfg` with the time step halved.
pub fn halved(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        dt: cfg.dt / 2.0,
        ..cfg.clone()
    }
}

/// The comparison behind [`robustness_check`], for reports computed elsewhere.
pub fn compare_reports(coarse: &ExperimentReport, fine: &ExperimentReport) -> ExperimentReport {
    let cfg = &coarse.params;
    let alpha = cfg.thresholds.alpha;
    let mut rb = ReportBuilder::new(&format!("robustness-{}", coarse.name));
    rb.count(coarse.samples_meta.total_samples + fine.samples_meta.total_samples);

    let mut flips = 0usize;
    for s in coarse.statistics.iter().filter(|s| is_p_value(s)) {
        if let Some(f) = fine.statistic(&s.name) {
            if (s.value > alpha) != (f.value > alpha) {
                flips += 1;
            }
        }
    }
    for c in &coarse.verdict.checks {
        if let Some(f) = fine.verdict.check(&c.name) {
            if c.passed != f.passed {
                flips += 1;
            }
        }
    }
    rb.stat(Statistic::with_se("verdict_flips", flips as f64, 0.0));
    rb.check(Check::new("verdict_flips", flips as f64, Comparison::AtMost, 0.0));

    for s in coarse.statistics.iter().filter(|s| s.name.starts_with("fit_")) {
        let (Some(f), Some(se)) = (fine.statistic(&s.name), s.std_error) else {
            continue;
        };
        let shift = (f.value - s.value).abs();
        rb.stat(Statistic::with_se(format!("shift[{}]", s.name), shift, se));
        rb.check(Check::new(format!("shift[{}]", s.name), shift, Comparison::Less, se));
    }
    rb.finish(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_check_is_trivially_robust() {
        let (r, coarse, fine) = robustness_check(ExperimentKind::DensityCheck, &ExperimentConfig::default()).unwrap();
        assert!(r.verdict.passed);
        assert_eq!(coarse.statistics, fine.statistics);
    }
}
