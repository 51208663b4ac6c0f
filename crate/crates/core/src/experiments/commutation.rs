use num_complex::Complex;
use serde::Serialize;

use crate::bessel::{ln_first_passage_density, Params, SdeConfig};
use crate::error::{Error, Result};
use crate::loewner::{atlas_from_driving, trace_tips, zip_curve, MapAtlas};
use crate::noise::SeedStream;
use crate::sampler::{fixed_duration_driving_until, tip_image, sample_curve_pair, MapSample, Order, TestSet};
use crate::stats::{energy_test, mean_se, EnergyOptions};

use super::{
    count_passes, par_collect, Check, Comparison, ExperimentConfig, ExperimentOutput, ReportBuilder, Statistic,
};

/// Factors of the density of the two-curve measure against two independent
/// curves, for one pair `(γ¹, γ²)` with `γ¹` from `x1` stopped at capacity
/// time `τ1` and `γ²` from `x2` stopped at `τ2`.
///
/// `h1` removes the image of `γ¹` under the map removing `γ²`, `h2` the image
/// of `γ²` under the map removing `γ¹`. The loop term is 1 (zero central
/// charge).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationWeight {
    pub b: f64,
    pub h1_prime_at_u2: f64,
    pub h2_prime_at_u1: f64,
    /// Distance between the images of the two tips under the map removing
    /// both curves.
    pub endpoint_gap: f64,
    pub x_gap: f64,
    pub phi_ratio: f64,
    pub loop_term: f64,
    /// Both ways of removing the two curves, compared: difference of the
    /// endpoint gaps, of the capacities, and sup difference on the test set.
    pub gap_discrepancy: f64,
    pub capacity_discrepancy: f64,
    pub map_discrepancy: f64,
}

impl CommutationWeight {
    /// `h1'^b h2'^b · loop · (gap/|x2 - x1|)^{2b} · φ-ratio`.
    pub fn weight(&self) -> f64 {
        self.h1_prime_at_u2.powf(self.b)
            * self.h2_prime_at_u1.powf(self.b)
            * self.loop_term
            * (self.endpoint_gap / self.x_gap).powf(2.0 * self.b)
            * self.phi_ratio
    }

    /// The same product with the gap factor raised to `-2b`.
    pub fn weight_inverse_gap(&self) -> f64 {
        self.weight() * (self.endpoint_gap / self.x_gap).powf(-4.0 * self.b)
    }
}

struct Side {
    derivative: f64,
    gap: f64,
    union: MapAtlas<f64>,
}

/// Removes `first`, then zips the image of the curve with tips `tips` rooted
/// at `root`. Evaluates the second map's derivative at the tip image of
/// `first`.
fn remove_both(first: &MapAtlas<f64>, first_tip: f64, root: f64, tips: &[Complex<f64>]) -> Result<Side> {
    let root_image = first.evaluate_real(root)?.0;
    let images = first.evaluate_many(tips)?;
    let zipped = zip_curve(first.a(), root_image, &images);
    let (at_tip, derivative) = zipped.atlas().evaluate_real(first_tip)?;
    Ok(Side {
        derivative,
        gap: (at_tip - zipped.driving()).abs(),
        union: first.then(zipped.atlas()),
    })
}

/// Assembles [`CommutationWeight`] for an independent pair of curves drawn
/// with `seeds`; `None` when the curves meet (zero weight).
#[allow(clippy::too_many_arguments)]
pub fn commutation_weight(
    p: &Params<f64>,
    x1: f64,
    x2: f64,
    r1: f64,
    r2: f64,
    t0: f64,
    cfg: &SdeConfig<f64>,
    seeds: &SeedStream,
) -> Result<Option<CommutationWeight>> {
    let d1 = fixed_duration_driving_until(p, x1, x2, t0, r1, cfg, seeds.brownian(0))?;
    let d2 = fixed_duration_driving_until(p, x2, x1, t0, r2, cfg, seeds.brownian(1))?;
    let (g1, g2) = (atlas_from_driving(&d1), atlas_from_driving(&d2));
    let (u1, u2) = (tip_image(&g1, x1), tip_image(&g2, x2));
    let (tips1, tips2) = (trace_tips(&g1), trace_tips(&g2));
    let (side2, side1) = match (remove_both(&g1, u1, x2, &tips2), remove_both(&g2, u2, x1, &tips1)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(Error::Swallowed { .. }), _) | (_, Err(Error::Swallowed { .. })) => return Ok(None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let ts = TestSet::new(p.a);
    let va = side2.union.evaluate_many(&ts.points)?;
    let vb = side1.union.evaluate_many(&ts.points)?;
    let map_discrepancy = va.iter().zip(&vb).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    let x_gap = (x2 - x1).abs();
    let rest = t0 - (g1.total_capacity() + g2.total_capacity()) / p.a;
    let gap = side2.gap;
    let phi_ratio = if rest > 0.0 {
        (ln_first_passage_density(p, gap, rest)? - ln_first_passage_density(p, x_gap, t0)?).exp()
    } else {
        0.0
    };
    Ok(Some(CommutationWeight {
        b: p.b,
        h1_prime_at_u2: side1.derivative,
        h2_prime_at_u1: side2.derivative,
        endpoint_gap: gap,
        x_gap,
        phi_ratio,
        loop_term: 1.0,
        gap_discrepancy: (side1.gap - side2.gap).abs(),
        capacity_discrepancy: (side1.union.total_capacity() - side2.union.total_capacity()).abs(),
        map_discrepancy,
    }))
}

/// Number of independent pairs used for the weight checks.
const WEIGHT_SAMPLES: usize = 200;

/// Two curves at zero central charge grown in either order: compares the
/// joint law of the tip images and the map removing both, and assembles the
/// density factors on independent pairs.
pub fn commutation_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.params()?;
    let th = &cfg.thresholds;
    let sde = SdeConfig::new(cfg.dt);
    let ts = TestSet::new(p.a);
    let root = cfg.seeds().derive_str("commutation");
    let (x1, x2) = (0.0, cfg.x);
    let mut rb = ReportBuilder::new("commutation");
    let mut ps = Vec::with_capacity(cfg.repetitions);
    let mut kept = Vec::new();
    for rep in 0..cfg.repetitions {
        let seeds = root.derive(rep as u64);
        let batch = |order: Order, tag: u64, label: &str| {
            let s = seeds.derive(tag);
            par_collect(cfg.n, |i| {
                let c = sample_curve_pair(&p, x1, x2, cfg.r1, cfg.r2, cfg.t0, order, &sde, &s.derive(i))?;
                let mut m = MapSample::new(c.union.evaluate_many(&ts.points)?, label, cfg.x, cfg.t0).with_index(i);
                m.extras = vec![c.u1, c.u2];
                Ok(m)
            })
        };
        let one = batch(Order::FirstThenSecond, 1, "order-1")?;
        let two = batch(Order::SecondThenFirst, 2, "order-2")?;
        rb.count(2 * cfg.n);
        let fa: Vec<Vec<f64>> = one.iter().map(MapSample::flatten).collect();
        let fb: Vec<Vec<f64>> = two.iter().map(MapSample::flatten).collect();
        let opts = EnergyOptions {
            permutations: cfg.permutations,
            standardize: true,
        };
        let e = energy_test(&fa, &fb, opts, &mut seeds.rng(0))?;
        rb.stat(Statistic::permutation(format!("energy_p[{rep}]"), e.p_value, e.permutations));
        ps.push(e.p_value);
        if rep == 0 {
            kept.extend(one);
            kept.extend(two);
        }
    }
    let frac = count_passes(&ps, th.alpha) as f64 / ps.len() as f64;
    rb.check(Check::new("pass_fraction", frac, Comparison::Greater, th.majority_fraction));

    let wseeds = root.derive_str("weights");
    let n_w = WEIGHT_SAMPLES.min(cfg.n);
    let weights = par_collect(n_w, |i| commutation_weight(&p, x1, x2, cfg.r1, cfg.r2, cfg.t0, &sde, &wseeds.derive(i)))?;
    rb.count(2 * n_w);
    let meet = weights.iter().filter(|w| w.is_none()).count() as f64 / n_w as f64;
    rb.stat(Statistic::with_se("meeting_fraction", meet, (meet * (1.0 - meet) / n_w as f64).sqrt()));
    let with_zeros = |f: fn(&CommutationWeight) -> f64| -> Vec<f64> {
        weights.iter().map(|w| w.as_ref().map_or(0.0, f)).collect()
    };
    let (m, se) = mean_se(&with_zeros(CommutationWeight::weight));
    rb.stat(Statistic::with_se("weight_mean", m, se));
    let (m, se) = mean_se(&with_zeros(CommutationWeight::weight_inverse_gap));
    rb.stat(Statistic::with_se("weight_inverse_gap_mean", m, se));
    let weights: Vec<CommutationWeight> = weights.into_iter().flatten().collect();
    let min_w = weights.iter().map(CommutationWeight::weight).fold(f64::INFINITY, f64::min);
    rb.stat(Statistic::with_se("weight_min", min_w, 0.0));
    rb.check(Check::new("weight_min", min_w, Comparison::Greater, 0.0));
    let worst = |f: fn(&CommutationWeight) -> f64| weights.iter().map(f).fold(0.0, f64::max);
    for (name, v) in [
        ("gap_discrepancy", worst(|c| c.gap_discrepancy / c.endpoint_gap)),
        ("capacity_discrepancy", worst(|c| c.capacity_discrepancy)),
        ("map_discrepancy", worst(|c| c.map_discrepancy)),
    ] {
        rb.stat(Statistic::with_se(format!("max_{name}"), v, 0.0));
        rb.check(Check::new(format!("max_{name}"), v, Comparison::Less, th.agreement_tol));
    }
    Ok(ExperimentOutput {
        report: rb.finish(cfg),
        samples: kept,
        extra_names: vec!["u1".into(), "u2".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_positive_and_sides_agree() {
        let p = Params::new(8.0 / 3.0).unwrap();
        let cfg = SdeConfig::new(2e-3);
        for i in 0..5 {
            let Some(w) = commutation_weight(&p, 0.0, 1.0, 0.25, 0.25, 1.0, &cfg, &SeedStream::new(i)).unwrap() else {
                continue;
            };
            assert!(w.weight() > 0.0, "{w:?}");
            assert!(w.h1_prime_at_u2 > 0.0 && w.h1_prime_at_u2 < 1.0);
            assert!(w.h2_prime_at_u1 > 0.0 && w.h2_prime_at_u1 < 1.0);
            assert!(w.gap_discrepancy < 1e-2 * w.endpoint_gap, "{w:?}");
            assert!(w.map_discrepancy < 1e-2, "{w:?}");
        }
    }
}
