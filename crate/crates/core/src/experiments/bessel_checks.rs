use serde::Serialize;

use crate::bessel::{
    bridge_density, first_passage_cdf, sample_bessel, sample_bridge_until, sample_gap_until_exit, weight_trace,
    Params, SdeConfig,
};
use crate::error::{domain, Error, Result};
use crate::noise::SeedStream;
use crate::quad::{integrate, Tolerance};
use crate::stats::{kolmogorov_q, ks_one_sample, mean_se, KsTest};

use super::par_collect;

/// CDF of the bridge marginal at time `t`, tabulated by quadrature and
/// interpolated linearly.
struct TabulatedCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    fn bridge(p: &Params<f64>, x0: f64, t: f64, t0: f64, cells: usize) -> Self {
        let hi = x0 + 12.0 * t.sqrt() + 1.0;
        let tol = Tolerance {
            abs: 1e-14,
            rel: 1e-11,
            max_intervals: 200,
        };
        let h = hi / cells as f64;
        let mut grid = vec![0.0];
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for k in 0..cells {
            let (lo, up) = (k as f64 * h, (k + 1) as f64 * h);
            acc += integrate(|y| bridge_density(p, t, x0, y, t0).unwrap_or(0.0), lo, up, tol).value;
            grid.push(up);
            cdf.push(acc);
        }
        Self { grid, cdf }
    }

    fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let k = self.grid.partition_point(|&g| g < y);
        if k >= self.grid.len() {
            return 1.0;
        }
        let (g0, g1) = (self.grid[k - 1], self.grid[k]);
        let w = (y - g0) / (g1 - g0);
        (self.cdf[k - 1] * (1.0 - w) + self.cdf[k] * w).min(1.0)
    }
}

/// KS test of simulated bridge values at time `t` against the marginal
/// density of the bridge.
pub fn bridge_marginal_check(
    p: &Params<f64>,
    x0: f64,
    t0: f64,
    t: f64,
    n: usize,
    cfg: &SdeConfig<f64>,
    seeds: &SeedStream,
) -> Result<KsTest> {
    if !(t > 0.0 && t < t0 - cfg.terminal_cutoff()) {
        return Err(domain(format!("check time {t} outside (0, {t0})")));
    }
    let values = par_collect(n, |i| {
        let path = sample_bridge_until(p, x0, t0, t, cfg, seeds.brownian(i))?;
        let last = path.last();
        if (last.t - t).abs() > 1e-12 {
            return Err(Error::Sampling(format!("bridge stopped at {} instead of {t}", last.t)));
        }
        Ok(last.x)
    })?;
    let table = TabulatedCdf::bridge(p, x0, t, t0, 4000);
    ks_one_sample(&values, |y| table.eval(y))
}

/// Means of `M_{t∧τ}` and `M̃_{t∧τ}` (normalised to 1 at time 0) under the
/// gap process of SLE to infinity, where `τ` is the exit time of
/// `[x0/2, 2 x0]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleCheck {
    pub times: Vec<f64>,
    pub m_mean: Vec<f64>,
    pub m_se: Vec<f64>,
    pub m_tilde_mean: Vec<f64>,
    pub m_tilde_se: Vec<f64>,
    pub samples: usize,
}

impl MartingaleCheck {
    /// Largest `|mean - 1| / se` over both weights and all times.
    pub fn max_z(&self) -> f64 {
        let z = |m: &[f64], s: &[f64]| m.iter().zip(s).fold(0.0f64, |a, (m, s)| a.max((m - 1.0).abs() / s));
        z(&self.m_mean, &self.m_se).max(z(&self.m_tilde_mean, &self.m_tilde_se))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn martingale_check(
    p: &Params<f64>,
    x0: f64,
    t0: f64,
    times: &[f64],
    n: usize,
    cfg: &SdeConfig<f64>,
    seeds: &SeedStream,
) -> Result<MartingaleCheck> {
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    if !(t_end > 0.0 && t_end < t0) || times.iter().any(|&t| t <= 0.0) {
        return Err(domain("check times must lie in (0, t0)"));
    }
    let rows = par_collect(n, |i| {
        let band = (0.5 * x0, 2.0 * x0);
        let (path, gprime) = sample_gap_until_exit(p, x0, t_end, band, cfg, seeds.brownian(i))?;
        let w = weight_trace(p, &path, &gprime, t0)?;
        let exit = path
            .values
            .iter()
            .position(|&x| x <= band.0 || x >= band.1)
            .unwrap_or(path.len() - 1);
        let row: Vec<(f64, f64)> = times
            .iter()
            .map(|&t| {
                let k = path.times.partition_point(|&s| s < t - 1e-12).min(exit);
                (w.m[k] / w.m[0], w.m_tilde[k] / w.m_tilde[0])
            })
            .collect();
        Ok(row)
    })?;
    let mut out = MartingaleCheck {
        times: times.to_vec(),
        m_mean: Vec::new(),
        m_se: Vec::new(),
        m_tilde_mean: Vec::new(),
        m_tilde_se: Vec::new(),
        samples: n,
    };
    for j in 0..times.len() {
        let (m, s) = mean_se(&rows.iter().map(|r| r[j].0).collect::<Vec<_>>());
        out.m_mean.push(m);
        out.m_se.push(s);
        let (m, s) = mean_se(&rows.iter().map(|r| r[j].1).collect::<Vec<_>>());
        out.m_tilde_mean.push(m);
        out.m_tilde_se.push(s);
    }
    Ok(out)
}

/// KS distance between simulated hitting times of the origin, censored at
/// the horizon, and the hitting-time distribution, on `[0, horizon]`.
pub fn passage_time_check(
    p: &Params<f64>,
    x0: f64,
    n: usize,
    cfg: &SdeConfig<f64>,
    seeds: &SeedStream,
) -> Result<KsTest> {
    let horizon = cfg
        .horizon
        .ok_or_else(|| Error::Config("passage-time check needs a horizon".into()))?;
    let mut hits: Vec<f64> = par_collect(n, |i| Ok(sample_bessel(p, x0, cfg, seeds.brownian(i))?.absorption_time))?
        .into_iter()
        .flatten()
        .collect();
    hits.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &t) in hits.iter().enumerate() {
        let f = first_passage_cdf(p, x0, t)?;
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    d = d.max((first_passage_cdf(p, x0, horizon)? - hits.len() as f64 / nf).abs());
    let s = nf.sqrt();
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_q((s + 0.12 + 0.11 / s) * d),
    })
}
