//! Two-sample tests and weighted least-squares fits.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
    /// Every pooled observation was identical.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    pub permutations: usize,
    /// Rescale each coordinate by its pooled standard deviation.
    pub standardize: bool,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self {
            permutations: 500,
            standardize: false,
        }
    }
}

const BATCH: usize = 8;

fn pooled(a: &[Vec<f64>], b: &[Vec<f64>], standardize: bool) -> Result<Vec<Vec<f64>>> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("energy test needs two nonempty samples"));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(domain("samples have different dimensions"));
    }
    let mut all: Vec<Vec<f64>> = a.iter().chain(b).cloned().collect();
    if standardize {
        let n = all.len() as f64;
        for k in 0..dim {
            let mean = all.iter().map(|v| v[k]).sum::<f64>() / n;
            let var = all.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for v in all.iter_mut() {
                v[k] = (v[k] - mean) / sd;
            }
        }
    }
    Ok(all)
}

fn energy_from_sums(s_aa: f64, row_a: f64, total: f64, n: f64, m: f64) -> f64 {
    let s_ab = row_a - s_aa;
    let s_bb = total - s_aa - 2.0 * s_ab;
    2.0 * s_ab / (n * m) - s_aa / (n * n) - s_bb / (m * m)
}

/// Energy-distance two-sample test with a permutation p-value
/// `(1 + #{E* >= E}) / (1 + P)`.
pub fn energy_test<R: Rng>(a: &[Vec<f64>], b: &[Vec<f64>], opts: EnergyOptions, rng: &mut R) -> Result<EnergyTest> {
    let all = pooled(a, b, opts.standardize)?;
    let total_n = all.len();
    let (na, nb) = (a.len(), b.len());
    let mut dist = vec![0f32; total_n * total_n];
    let mut degenerate = true;
    for i in 0..total_n {
        for j in (i + 1)..total_n {
            let d = all[i].iter().zip(&all[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            if d > 0.0 {
                degenerate = false;
            }
            dist[i * total_n + j] = d as f32;
            dist[j * total_n + i] = d as f32;
        }
    }
    if degenerate {
        return Ok(EnergyTest {
            statistic: 0.0,
            p_value: 1.0,
            permutations: 0,
            degenerate: true,
        });
    }
    let rows: Vec<f64> = (0..total_n)
        .map(|i| dist[i * total_n..(i + 1) * total_n].iter().map(|&d| d as f64).sum())
        .collect();
    let total: f64 = rows.iter().sum();
    let (n, m) = (na as f64, nb as f64);

    let observed = {
        let mut s_aa = 0.0;
        for i in 0..na {
            s_aa += dist[i * total_n..i * total_n + na].iter().map(|&d| d as f64).sum::<f64>();
        }
        let row_a: f64 = rows[..na].iter().sum();
        energy_from_sums(s_aa, row_a, total, n, m)
    };

    let mut labels: Vec<usize> = (0..total_n).collect();
    let mut exceed = 0usize;
    let mut done = 0usize;
    let mut mask = vec![0f32; total_n * BATCH];
    while done < opts.permutations {
        let width = BATCH.min(opts.permutations - done);
        mask.iter_mut().for_each(|v| *v = 0.0);
        let mut row_a = [0f64; BATCH];
        for b in 0..width {
            labels.shuffle(rng);
            for &i in &labels[..na] {
                mask[i * BATCH + b] = 1.0;
                row_a[b] += rows[i];
            }
        }
        let mut s_aa = [0f64; BATCH];
        for i in 0..total_n {
            let row = &dist[i * total_n..(i + 1) * total_n];
            let mut acc = [0f32; BATCH];
            for (j, &d) in row.iter().enumerate() {
                let mj = &mask[j * BATCH..(j + 1) * BATCH];
                for b in 0..BATCH {
                    acc[b] += d * mj[b];
                }
            }
            let mi = &mask[i * BATCH..(i + 1) * BATCH];
            for b in 0..BATCH {
                s_aa[b] += (acc[b] * mi[b]) as f64;
            }
        }
        for b in 0..width {
            let e = energy_from_sums(s_aa[b], row_a[b], total, n, m);
            // tolerate f32 rounding in the permuted sums
            if e >= observed - 1e-6 * observed.abs() {
                exceed += 1;
            }
        }
        done += width;
    }
    Ok(EnergyTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + opts.permutations) as f64,
        permutations: opts.permutations,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov–Smirnov test against the CDF `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest> {
    if sample.is_empty() {
        return Err(domain("KS test needs a nonempty sample"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsTest {
        statistic: d,
        p_value: ks_p(d, n),
    })
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("KS test needs nonempty samples"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsTest {
        statistic: d,
        p_value: ks_p(d, ne),
    })
}

/// Weighted least-squares fit `y ≈ Σ β_k x^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Weighted residual variance; standard errors are inflated by it when
    /// it exceeds 1.
    pub dispersion: f64,
    pub points: usize,
}

pub const Z95: f64 = 1.959_963_984_540_054;

impl Fit {
    pub fn interval(&self, k: usize) -> (f64, f64) {
        let (b, se) = (self.coefficients[k], self.std_errors[k]);
        (b - Z95 * se, b + Z95 * se)
    }
}

fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                let (pivot, pivot_rhs) = (m[col].clone(), rhs[col].clone());
                m[row].iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
                rhs[row].iter_mut().zip(&pivot_rhs).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    for row in 0..n {
        let d = m[row][row];
        rhs[row].iter_mut().for_each(|v| *v /= d);
    }
    Some(rhs)
}

/// Polynomial weighted least squares of the given degree; `weights` are
/// inverse variances.
pub fn weighted_polyfit(x: &[f64], y: &[f64], weights: &[f64], degree: usize) -> Result<Fit> {
    let p = degree + 1;
    if x.len() != y.len() || x.len() != weights.len() {
        return Err(domain("fit inputs have different lengths"));
    }
    if x.len() < p {
        return Err(domain(format!("need at least {p} points for a degree-{degree} fit, got {}", x.len())));
    }
    let mut xtwx = vec![vec![0.0; p]; p];
    let mut xtwy = vec![vec![0.0]; p];
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(weights) {
        let pow: Vec<f64> = (0..p).map(|k| xi.powi(k as i32)).collect();
        for r in 0..p {
            xtwy[r][0] += wi * pow[r] * yi;
            for c in 0..p {
                xtwx[r][c] += wi * pow[r] * pow[c];
            }
        }
    }
    let identity: Vec<Vec<f64>> = (0..p).map(|r| (0..p).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
    let cov = solve(xtwx.clone(), identity).ok_or_else(|| domain("singular design"))?;
    let beta: Vec<f64> = (0..p).map(|r| (0..p).map(|c| cov[r][c] * xtwy[c][0]).sum()).collect();
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((&xi, &yi), &wi)| {
            let fit: f64 = (0..p).map(|k| beta[k] * xi.powi(k as i32)).sum();
            wi * (yi - fit).powi(2)
        })
        .sum();
    let dispersion = if x.len() > p { rss / (x.len() - p) as f64 } else { 1.0 };
    let scale = dispersion.max(1.0);
    Ok(Fit {
        std_errors: (0..p).map(|k| (cov[k][k] * scale).sqrt()).collect(),
        coefficients: beta,
        dispersion,
        points: x.len(),
    })
}

/// `ln(k/n)` and its delta-method inverse variance `n k / (n - k)`.
pub fn log_survival(k: usize, n: usize) -> Option<(f64, f64)> {
    if k == 0 || n == 0 {
        return None;
    }
    let s = k as f64 / n as f64;
    let var = if k == n { 1.0 / (n as f64 * n as f64) } else { (1.0 - s) / (n as f64 * s) };
    Some((s.ln(), 1.0 / var))
}

/// Mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
