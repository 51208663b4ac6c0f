//! Samplers for SLE to infinity, SLE between two boundary points with fixed
//! capacity duration, and the two-stage constructions built from it. Maps are
//! compared through their values on a fixed set of interior test points.

use num_complex::Complex;
use serde::Serialize;

use crate::bessel::{sample_bridge_until, BesselPath, BridgeStepper, Params, SdeConfig};
use crate::error::{domain, Error, Result};
use crate::loewner::{atlas_from_driving, DrivingPath, MapAtlas, MapStep, Zipper};
use crate::noise::{BrownianSource, SeedStream};
use crate::scalar::Scalar;

/// Test points: the centre `i(√(8a) + 1)` and 12 points on the circle of
/// radius 0.999 around it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSet<T> {
    pub center: Complex<T>,
    pub radius: T,
    pub points: Vec<Complex<T>>,
}

impl<T: Scalar> TestSet<T> {
    pub const SIZE: usize = 13;

    pub fn new(a: T) -> Self {
        let center = Complex::new(T::zero(), (T::lit(8.0) * a).sqrt() + T::one());
        let mut points = vec![center];
        let r = T::lit(0.999);
        for k in 0..12 {
            let theta = T::TAU() * T::from_usize(k).unwrap() / T::lit(12.0);
            points.push(center + Complex::from_polar(r, theta));
        }
        Self {
            center,
            radius: T::one(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMeta {
    pub index: u64,
    /// Direction (`"x1->x2"`), `r`, or order label.
    pub label: String,
    pub x: f64,
    pub t0: f64,
}

/// A sampled map restricted to the test set, plus optional real features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSample<T> {
    pub values: Vec<Complex<T>>,
    pub extras: Vec<T>,
    pub meta: SampleMeta,
}

impl<T: Scalar> MapSample<T> {
    pub fn new(values: Vec<Complex<T>>, label: impl Into<String>, x: f64, t0: f64) -> Self {
        Self {
            values,
            extras: Vec::new(),
            meta: SampleMeta {
                index: 0,
                label: label.into(),
                x,
                t0,
            },
        }
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.meta.index = index;
        self
    }

    /// Extras followed by `(Re, Im)` of each value.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.extras.iter().map(|v| v.to_f64_lossy()).collect();
        for z in &self.values {
            out.push(z.re.to_f64_lossy());
            out.push(z.im.to_f64_lossy());
        }
        out
    }

    /// `max_k |g_k - h_k|` over the test set.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }
}

/// `U_t = -B_t` on the grid `k dt`, `k dt <= t`.
pub fn sle_to_infinity_driving<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    t: T,
    dt: T,
    mut noise: B,
) -> Result<DrivingPath<T>> {
    if !(t > T::zero() && dt > T::zero()) {
        return Err(domain("duration and step must be positive"));
    }
    let n = (t / dt).ceil().to_usize().unwrap_or(0).max(1);
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let tk = (T::from_usize(k).unwrap() * dt).min(t);
        times.push(tk);
        values.push(if k == 0 { T::zero() } else { -noise.value(tk, dt) });
    }
    DrivingPath::new(times, values, p.a)
}

/// Driving function read off a bridge path for the curve from `x1` towards
/// `x2`: `U = x2 ± (∫a/X - X)` with the sign of `x2 - x1`.
pub fn driving_from_gap<T: Scalar>(p: &Params<T>, x1: T, x2: T, path: &BesselPath<T>) -> Result<DrivingPath<T>> {
    let sign = if x2 > x1 { T::one() } else { -T::one() };
    let values = path
        .drift_integral
        .iter()
        .zip(&path.values)
        .map(|(&i, &x)| x2 + sign * (i - x))
        .collect();
    DrivingPath::new(path.times.clone(), values, p.a)
}

fn check_endpoints<T: Scalar>(x1: T, x2: T, t0: T) -> Result<()> {
    if x1 == x2 || !x1.is_finite() || !x2.is_finite() {
        return Err(domain(format!("endpoints must be distinct and finite, got {x1}, {x2}")));
    }
    if !(t0 > T::zero() && t0.is_finite()) {
        return Err(domain(format!("duration must be positive, got {t0}")));
    }
    Ok(())
}

/// Driving function of SLE from `x1` to `x2` with duration `t0`, stopped at
/// `stop` (the whole path when `stop >= t0`).
pub fn fixed_duration_driving_until<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x1: T,
    x2: T,
    t0: T,
    stop: T,
    cfg: &SdeConfig<T>,
    noise: B,
) -> Result<DrivingPath<T>> {
    check_endpoints(x1, x2, t0)?;
    let path = sample_bridge_until(p, (x2 - x1).abs(), t0, stop, cfg, noise)?;
    driving_from_gap(p, x1, x2, &path)
}

pub fn fixed_duration_driving<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x1: T,
    x2: T,
    t0: T,
    cfg: &SdeConfig<T>,
    noise: B,
) -> Result<DrivingPath<T>> {
    fixed_duration_driving_until(p, x1, x2, t0, t0, cfg, noise)
}

/// `U ↦ U_0 + s (U - U_0)`; used to build deliberately wrong samplers.
pub fn scale_driving<T: Scalar>(d: &DrivingPath<T>, s: T) -> DrivingPath<T> {
    let u0 = d.values[0];
    DrivingPath {
        times: d.times.clone(),
        values: d.values.iter().map(|&u| u0 + s * (u - u0)).collect(),
        a: d.a,
    }
}

fn direction_label<T: Scalar>(x1: T, x2: T) -> String {
    format!("{}->{}", x1, x2)
}

fn evaluate_on<T: Scalar>(m: &MapAtlas<T>, ts: &TestSet<T>) -> Result<Vec<Complex<T>>> {
    m.evaluate_many(&ts.points)
}

/// Map of SLE from `x1` to `x2` of duration `t0`, evaluated on the test set.
/// `driving_scale` other than 1 gives the corrupted sampler.
#[allow(clippy::too_many_arguments)]
pub fn sample_musharp<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x1: T,
    x2: T,
    t0: T,
    cfg: &SdeConfig<T>,
    driving_scale: T,
    noise: B,
    ts: &TestSet<T>,
) -> Result<MapSample<T>> {
    let mut d = fixed_duration_driving(p, x1, x2, t0, cfg, noise)?;
    if driving_scale != T::one() {
        d = scale_driving(&d, driving_scale);
    }
    let values = evaluate_on(&atlas_from_driving(&d), ts)?;
    Ok(MapSample::new(
        values,
        direction_label(x1, x2),
        (x2 - x1).abs().to_f64_lossy(),
        t0.to_f64_lossy(),
    ))
}

/// First stage of the two-stage constructions: SLE from `x1` to `x2` of
/// duration `t0` stopped at `stop`.
struct Stage<T> {
    atlas: MapAtlas<T>,
    /// Image of the tip.
    tip: T,
    /// Image of the target point.
    target: T,
}

#[allow(clippy::too_many_arguments)]
fn stage<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x1: T,
    x2: T,
    t0: T,
    stop: T,
    cfg: &SdeConfig<T>,
    noise: B,
) -> Result<Stage<T>> {
    let d = fixed_duration_driving_until(p, x1, x2, t0, stop, cfg, noise)?;
    let atlas = atlas_from_driving(&d);
    let tip = tip_image(&atlas, x1);
    let target = atlas
        .evaluate_real(x2)
        .map_err(|e| Error::Sampling(format!("target swallowed before the stopping time: {e}")))?
        .0;
    Ok(Stage { atlas, tip, target })
}

/// Image of the tip of the discrete hull: the driving value of the last step.
pub(crate) fn tip_image<T: Scalar>(m: &MapAtlas<T>, start: T) -> T {
    m.steps().last().map_or(start, |s| s.driving)
}

fn residual_is_empty<T: Scalar>(remaining: T, cfg: &SdeConfig<T>) -> bool {
    remaining <= cfg.terminal_cutoff()
}

/// `μ_r`: SLE from 0 to `x` (duration 1) stopped at `r`, followed by SLE from
/// the image of `x` to the image of the tip with the residual duration.
pub fn sample_mu_r<T: Scalar>(
    p: &Params<T>,
    x: T,
    r: T,
    cfg: &SdeConfig<T>,
    seeds: &SeedStream,
    ts: &TestSet<T>,
) -> Result<MapSample<T>> {
    if !(T::zero() <= r && r <= T::one()) {
        return Err(domain(format!("r must lie in [0, 1], got {r}")));
    }
    if !(x > T::zero()) {
        return Err(domain(format!("x must be positive, got {x}")));
    }
    let one = T::one();
    let atlas = if residual_is_empty(one - r, cfg) {
        atlas_from_driving(&fixed_duration_driving(p, T::zero(), x, one, cfg, seeds.brownian(0))?)
    } else {
        let (first, tip, target) = if r > T::zero() {
            let s = stage(p, T::zero(), x, one, r, cfg, seeds.brownian(0))?;
            (s.atlas, s.tip, s.target)
        } else {
            (MapAtlas::identity(p.a), T::zero(), x)
        };
        let second = fixed_duration_driving(p, target, tip, one - r, cfg, seeds.brownian(1))?;
        first.then(&atlas_from_driving(&second))
    };
    let values = evaluate_on(&atlas, ts)?;
    Ok(MapSample::new(values, format!("{}", r), x.to_f64_lossy(), 1.0))
}

/// Output of [`coupled_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair<T> {
    /// Step 3a ordering.
    pub tilde: MapSample<T>,
    /// Step 3b ordering.
    pub plain: MapSample<T>,
    /// Separation of the two image endpoints before the final step.
    pub endpoint_gap: T,
}

/// Coupling of `μ_s` and `μ_r` (`r <= s`, `ε = s - r`) sharing everything but
/// the last `ε` of capacity.
///
/// 1. SLE from 0 to `x` stopped at `r`.
/// 2. SLE from the image of `x` to the image tip, duration `1 - r`, stopped at
///    `1 - s`. Let `x2` be its tip image and `y2` the image of its target.
/// 3. Fill the remaining duration `ε` from `y2` to `x2` (3a, giving `g̃`) or
///    from `x2` to `y2` (3b, giving `g`), independently.
pub fn coupled_pair<T: Scalar>(
    p: &Params<T>,
    x: T,
    r: T,
    s: T,
    cfg: &SdeConfig<T>,
    seeds: &SeedStream,
    ts: &TestSet<T>,
) -> Result<CoupledPair<T>> {
    let (zero, one) = (T::zero(), T::one());
    if !(zero <= r && r <= s && s <= one) {
        return Err(domain(format!("need 0 <= r <= s <= 1, got r = {r}, s = {s}")));
    }
    let eps = s - r;
    let label = |tag: &str| format!("{tag} r={r} s={s}");
    if residual_is_empty(eps, cfg) {
        let g = sample_mu_r(p, x, r, cfg, seeds, ts)?;
        let mut plain = g.clone();
        plain.meta.label = label("3b");
        let mut tilde = g;
        tilde.meta.label = label("3a");
        return Ok(CoupledPair {
            tilde,
            plain,
            endpoint_gap: zero,
        });
    }
    let (first, tip, target) = if r > zero {
        let st = stage(p, zero, x, one, r, cfg, seeds.brownian(0))?;
        (st.atlas, st.tip, st.target)
    } else {
        (MapAtlas::identity(p.a), zero, x)
    };
    let second = stage(p, target, tip, one - r, one - s, cfg, seeds.brownian(1))?;
    let base = first.then(&second.atlas);
    let (x2, y2) = (second.tip, second.target);
    let step_a = fixed_duration_driving(p, y2, x2, eps, cfg, seeds.brownian(2))?;
    let step_b = fixed_duration_driving(p, x2, y2, eps, cfg, seeds.brownian(3))?;
    let xf = x.to_f64_lossy();
    let tilde = MapSample::new(evaluate_on(&base.then(&atlas_from_driving(&step_a)), ts)?, label("3a"), xf, 1.0);
    let plain = MapSample::new(evaluate_on(&base.then(&atlas_from_driving(&step_b)), ts)?, label("3b"), xf, 1.0);
    Ok(CoupledPair {
        tilde,
        plain,
        endpoint_gap: (x2 - y2).abs(),
    })
}

/// Which curve grows first in the two-curve construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    /// Curve from `x1` first, then the curve from `x2` in the slit domain.
    FirstThenSecond,
    SecondThenFirst,
}

/// Two curves, `γ¹` from `x1` and `γ²` from `x2`, aimed at each other.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePair<T> {
    /// Final driving value of each curve's own Loewner chain.
    pub u1: T,
    pub u2: T,
    /// Capacity of each curve on its own.
    pub cap1: T,
    pub cap2: T,
    /// Map removing both curves.
    pub union: MapAtlas<T>,
}

/// Grows SLE from `start` towards `target` (duration `t0`) in the domain
/// slit by `first`, until the curve pulled back to the half-plane has
/// capacity `cap`. Returns the image-domain atlas and the zipper of the
/// pulled-back curve, rooted at `root`.
#[allow(clippy::too_many_arguments)]
fn grow_until_capacity<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    first: &MapAtlas<T>,
    root: T,
    start: T,
    target: T,
    t0: T,
    cap: T,
    cfg: &SdeConfig<T>,
    noise: B,
) -> Result<(MapAtlas<T>, Zipper<T>)> {
    let sign = if target > start { T::one() } else { -T::one() };
    let mut stepper = BridgeStepper::new(p, (target - start).abs(), t0, cfg, noise)?;
    let mut image = MapAtlas::identity(p.a);
    let mut zipper = Zipper::new(p.a, root);
    let two_a = T::lit(2.0) * p.a;
    let half = T::lit(0.5);
    let mut prev = stepper.point();
    let mut u_prev = start;
    while zipper.capacity() < cap {
        let Some(pt) = stepper.advance(t0)? else {
            break;
        };
        let u = target + sign * (pt.integral - pt.x);
        let step = MapStep {
            duration: pt.t - prev.t,
            driving: half * (u + u_prev),
        };
        let top = Complex::new(step.driving, (two_a * step.duration).sqrt());
        let tip = first.evaluate_inverse(image.evaluate_inverse(top));
        image.push(step);
        zipper.push(tip);
        prev = pt;
        u_prev = u;
    }
    if zipper.capacity() < cap {
        return Err(Error::Sampling(format!(
            "second curve reached its target with capacity {} < {cap}",
            zipper.capacity()
        )));
    }
    Ok((image, zipper))
}

/// Samples the two-curve configuration in the given order: the first curve is
/// SLE from its endpoint to the other (duration `t0`) stopped at its capacity
/// time, the second is SLE in the slit domain from the image of its endpoint
/// to the first tip, stopped when its own capacity reaches `a r`.
#[allow(clippy::too_many_arguments)]
pub fn sample_curve_pair<T: Scalar>(
    p: &Params<T>,
    x1: T,
    x2: T,
    r1: T,
    r2: T,
    t0: T,
    order: Order,
    cfg: &SdeConfig<T>,
    seeds: &SeedStream,
) -> Result<CurvePair<T>> {
    check_endpoints(x1, x2, t0)?;
    if !(r1 > T::zero() && r2 > T::zero() && r1 + r2 < t0) {
        return Err(domain(format!("need r1, r2 > 0 and r1 + r2 < t0, got {r1}, {r2}")));
    }
    let (a_start, a_end, a_r, b_r) = match order {
        Order::FirstThenSecond => (x1, x2, r1, r2),
        Order::SecondThenFirst => (x2, x1, r2, r1),
    };
    let first = stage(p, a_start, a_end, t0, a_r, cfg, seeds.brownian(0))?;
    let (image, zipper) = grow_until_capacity(
        p,
        &first.atlas,
        a_end,
        first.target,
        first.tip,
        t0 - a_r,
        p.a * b_r,
        cfg,
        seeds.brownian(1),
    )?;
    let cap_first = first.atlas.total_capacity();
    let cap_second = zipper.capacity();
    let union = first.atlas.then(&image);
    let (u1, u2, cap1, cap2) = match order {
        Order::FirstThenSecond => (first.tip, zipper.driving(), cap_first, cap_second),
        Order::SecondThenFirst => (zipper.driving(), first.tip, cap_second, cap_first),
    };
    Ok(CurvePair {
        u1,
        u2,
        cap1,
        cap2,
        union,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kappa: f64) -> Params<f64> {
        Params::new(kappa).unwrap()
    }

    #[test]
    fn test_set_geometry() {
        let ts = TestSet::new(0.5f64);
        assert_eq!(ts.len(), TestSet::<f64>::SIZE);
        assert!((ts.center.im - 3.0).abs() < 1e-15);
        for z in &ts.points {
            assert!(z.im > 1.0f64.sqrt());
            assert!((z - ts.center).norm() < 1.0);
        }
        assert_eq!(ts, TestSet::new(0.5));
    }

    #[test]
    fn driving_starts_at_x1_and_lasts_t0() {
        let p = params(3.0);
        let cfg = SdeConfig::new(1e-3);
        let seeds = SeedStream::new(3);
        for (x1, x2) in [(0.0, 1.0), (1.0, 0.0), (-0.5, 2.0)] {
            let d = fixed_duration_driving(&p, x1, x2, 1.0, &cfg, seeds.brownian(0)).unwrap();
            assert_eq!(d.values[0], x1);
            assert_eq!(d.final_time(), 1.0);
            // the final driving value is the image of x2, pushed away from x1
            assert!((d.values.last().unwrap() - x2) * (x2 - x1) > 0.0);
        }
    }

    #[test]
    fn reversed_direction_is_the_reflection() {
        let p = params(4.0);
        let cfg = SdeConfig::new(1e-3);
        let seeds = SeedStream::new(8);
        let fwd = fixed_duration_driving(&p, 0.0, 1.0, 1.0, &cfg, seeds.brownian(0)).unwrap();
        let back = fixed_duration_driving(&p, 1.0, 0.0, 1.0, &cfg, seeds.brownian(0)).unwrap();
        for (u, v) in fwd.values.iter().zip(&back.values) {
            assert!((v - (1.0 - u)).abs() < 1e-12);
        }
        let neg = fixed_duration_driving(&p, -1.0, 0.0, 1.0, &cfg, seeds.brownian(0)).unwrap();
        for (u, v) in back.values.iter().zip(&neg.values) {
            assert!((u + v).abs() < 1e-12);
        }
    }

    #[test]
    fn musharp_capacity_and_height() {
        let p = params(8.0 / 3.0);
        let ts = TestSet::new(p.a);
        let cfg = SdeConfig::new(1e-3);
        let g = sample_musharp(&p, 0.0, 1.0, 1.0, &cfg, 1.0, SeedStream::new(1).brownian(0), &ts).unwrap();
        for (z, w) in ts.points.iter().zip(&g.values) {
            assert!(w.im >= (z.im * z.im - 2.0 * p.a).sqrt() - 1e-9);
        }
        let d = fixed_duration_driving(&p, 0.0, 1.0, 1.0, &cfg, SeedStream::new(1).brownian(0)).unwrap();
        let m = atlas_from_driving(&d);
        let z = Complex::new(0.0, 1e3);
        let cap = (z * (m.evaluate(z).unwrap() - z)).re;
        assert!((cap - p.a).abs() < 1e-3 * p.a);
    }

    #[test]
    fn mu_r_endpoints_and_capacity() {
        let p = params(4.0);
        let ts = TestSet::new(p.a);
        let cfg = SdeConfig::new(2e-3);
        let seeds = SeedStream::new(4);
        for r in [0.0, 0.3, 1.0] {
            let g = sample_mu_r(&p, 1.0, r, &cfg, &seeds, &ts).unwrap();
            assert_eq!(g.values.len(), 13);
            assert!(g.values.iter().all(|w| w.im > 0.0));
        }
        // r = 0 is the reversed curve run on the second stream
        let g0 = sample_mu_r(&p, 1.0, 0.0, &cfg, &seeds, &ts).unwrap();
        let direct = sample_musharp(&p, 1.0, 0.0, 1.0, &cfg, 1.0, seeds.brownian(1), &ts).unwrap();
        assert_eq!(g0.values, direct.values);
        let g1 = sample_mu_r(&p, 1.0, 1.0, &cfg, &seeds, &ts).unwrap();
        let direct = sample_musharp(&p, 0.0, 1.0, 1.0, &cfg, 1.0, seeds.brownian(0), &ts).unwrap();
        assert_eq!(g1.values, direct.values);
    }

    #[test]
    fn coupled_pair_degenerate_and_close() {
        let p = params(4.0);
        let ts = TestSet::new(p.a);
        let cfg = SdeConfig::new(2e-3);
        let seeds = SeedStream::new(6);
        let same = coupled_pair(&p, 1.0, 0.5, 0.5, &cfg, &seeds, &ts).unwrap();
        assert_eq!(same.tilde.values, same.plain.values);
        let pair = coupled_pair(&p, 1.0, 0.45, 0.55, &cfg, &seeds, &ts).unwrap();
        let d = pair.tilde.sup_distance(&pair.plain);
        assert!(d > 0.0 && d < 0.5, "{d}");
    }

    #[test]
    fn curve_pair_capacities() {
        let p = params(8.0 / 3.0);
        let cfg = SdeConfig::new(2e-3);
        let seeds = SeedStream::new(10);
        for order in [Order::FirstThenSecond, Order::SecondThenFirst] {
            let c = sample_curve_pair(&p, 0.0, 1.0, 0.25, 0.25, 1.0, order, &cfg, &seeds).unwrap();
            assert!((c.cap1 - 0.25 * p.a).abs() < 0.02 * p.a, "{order:?} {}", c.cap1);
            assert!((c.cap2 - 0.25 * p.a).abs() < 0.02 * p.a, "{order:?} {}", c.cap2);
            assert!(c.union.total_capacity() < c.cap1 + c.cap2);
            assert!(c.u1 < c.u2);
        }
    }
}
