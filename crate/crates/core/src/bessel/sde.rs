use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::BrownianSource;
use crate::scalar::Scalar;

use super::Params;

/// Step-size controls shared by the Euler–Maruyama samplers.
///
/// The step is `min(dt, step_fraction * X², step_fraction * (t0 - t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeConfig<T> {
    pub dt: T,
    pub step_fraction: T,
    pub max_halvings: usize,
    /// Bridge integration stops at `t0 - terminal_cutoff` (default `dt`).
    pub terminal_cutoff: Option<T>,
    /// Censoring time for unconditioned paths.
    pub horizon: Option<T>,
    /// Absorption level for unconditioned paths (default `1e-3 * sqrt(dt)`).
    pub absorb_level: Option<T>,
    /// Multiplies the `2a / X` term of the bridge drift. Only used to build
    /// deliberately wrong samplers.
    pub drift_scale: T,
}

impl<T: Scalar> SdeConfig<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            step_fraction: T::lit(0.1),
            max_halvings: 24,
            terminal_cutoff: None,
            horizon: None,
            absorb_level: None,
            drift_scale: T::one(),
        }
    }

    pub fn with_horizon(mut self, horizon: T) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_drift_scale(mut self, s: T) -> Self {
        self.drift_scale = s;
        self
    }

    pub fn terminal_cutoff(&self) -> T {
        self.terminal_cutoff.unwrap_or(self.dt)
    }

    pub fn absorb_level(&self) -> T {
        self.absorb_level.unwrap_or_else(|| T::lit(1e-3) * self.dt.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if !ok(self.dt) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(ok(self.step_fraction) && self.step_fraction <= T::one()) {
            return Err(Error::Config(format!("step_fraction must lie in (0, 1], got {}", self.step_fraction)));
        }
        for (name, v) in [
            ("terminal_cutoff", self.terminal_cutoff),
            ("horizon", self.horizon),
            ("absorb_level", self.absorb_level),
        ] {
            if let Some(v) = v {
                if !ok(v) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint<T> {
    pub t: T,
    pub x: T,
    /// `∫_0^t a / X_s ds`
    pub integral: T,
}

/// A sampled path on its (adaptive) time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesselPath<T> {
    pub x0: T,
    /// Conditioned hitting time; infinite for unconditioned paths.
    pub t0: T,
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub drift_integral: Vec<T>,
    /// Absorption time of an unconditioned path, `None` if censored.
    pub absorption_time: Option<T>,
}

impl<T: Scalar> BesselPath<T> {
    fn start(x0: T, t0: T) -> Self {
        Self {
            x0,
            t0,
            times: vec![T::zero()],
            values: vec![x0],
            drift_integral: vec![T::zero()],
            absorption_time: None,
        }
    }

    fn push(&mut self, p: PathPoint<T>) {
        self.times.push(p.t);
        self.values.push(p.x);
        self.drift_integral.push(p.integral);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, k: usize) -> PathPoint<T> {
        PathPoint {
            t: self.times[k],
            x: self.values[k],
            integral: self.drift_integral[k],
        }
    }

    pub fn last(&self) -> PathPoint<T> {
        self.point(self.len() - 1)
    }

    pub fn end_time(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }
}

/// Smallest step that still advances the clock at `t`.
fn step_floor<T: Scalar>(t: T) -> T {
    T::lit(16.0) * T::epsilon() * t.max(T::one())
}

fn not_finite<T: Scalar>(t: T, x: T) -> Error {
    Error::Sampling(format!("non-finite state x = {x} at t = {t}"))
}

/// One Euler step from `(t, x)` with the positivity guard: a small undershoot
/// (below one diffusion scale) is reflected, a large one halves the step.
/// Both ends of the increment are read at the step's own resolution.
/// Returns `(h, x_new)`.
fn guarded_step<T: Scalar, B: BrownianSource>(
    t: T,
    x: T,
    mut h: T,
    drift: T,
    max_halvings: usize,
    noise: &mut B,
) -> Result<(T, T)> {
    let floor = step_floor(t);
    for k in 0..=max_halvings {
        if k > 0 && h < floor {
            break;
        }
        let w: T = noise.value(t, h);
        let w1: T = noise.value(t + h, h);
        let mut x1 = x + drift * h + (w1 - w);
        if x1 <= T::zero() && -x1 < h.sqrt() {
            x1 = -x1;
        }
        if x1 > T::zero() {
            if !x1.is_finite() {
                return Err(not_finite(t + h, x1));
            }
            return Ok((h, x1));
        }
        h = h / T::lit(2.0);
    }
    Err(Error::StepTooCoarse {
        time: t.to_f64_lossy(),
        value: x.to_f64_lossy(),
        halvings: max_halvings,
    })
}

/// Incremental sampler of the bridge `dX = [2a/X - X/(t0 - t)] dt + dW`
/// from `x0` to 0 at time `t0`.
///
/// Integration runs to `t0 - δ`; the last point `(t0, 0)` is appended with the
/// drift integral closed by the square-root profile, `2aδ / X`.
pub struct BridgeStepper<T, B> {
    a: T,
    drift_coef: T,
    cfg: SdeConfig<T>,
    t0: T,
    t_end: T,
    delta: T,
    point: PathPoint<T>,
    finished: bool,
    noise: B,
}

impl<T: Scalar, B: BrownianSource> BridgeStepper<T, B> {
    pub fn new(p: &Params<T>, x0: T, t0: T, cfg: &SdeConfig<T>, noise: B) -> Result<Self> {
        cfg.validate()?;
        if !(x0 > T::zero() && x0.is_finite()) {
            return Err(Error::Domain(format!("bridge start must be positive, got {x0}")));
        }
        if !(t0 > T::zero() && t0.is_finite()) {
            return Err(Error::Domain(format!("bridge duration must be positive, got {t0}")));
        }
        let delta = cfg.terminal_cutoff().min(t0 / T::lit(2.0));
        Ok(Self {
            a: p.a,
            drift_coef: T::lit(2.0) * p.a * cfg.drift_scale,
            cfg: *cfg,
            t0,
            t_end: t0 - delta,
            delta,
            point: PathPoint {
                t: T::zero(),
                x: x0,
                integral: T::zero(),
            },
            finished: false,
            noise,
        })
    }

    pub fn point(&self) -> PathPoint<T> {
        self.point
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn duration(&self) -> T {
        self.t0
    }

    /// Time at which integration hands over to the terminal point.
    pub fn cutoff_time(&self) -> T {
        self.t_end
    }

    /// Advances by one step without passing `limit`. Returns `None` once the
    /// path is finished or `limit` has been reached.
    pub fn advance(&mut self, limit: T) -> Result<Option<PathPoint<T>>> {
        if self.finished {
            return Ok(None);
        }
        let PathPoint { t, x, integral } = self.point;
        if t >= self.t_end {
            if limit < self.t0 {
                return Ok(None);
            }
            self.finished = true;
            self.point = PathPoint {
                t: self.t0,
                x: T::zero(),
                integral: integral + T::lit(2.0) * self.a * self.delta / x,
            };
            return Ok(Some(self.point));
        }
        let target = limit.min(self.t_end);
        if t >= target {
            return Ok(None);
        }
        let f = self.cfg.step_fraction;
        let mut h = self.cfg.dt.min(f * x * x).min(f * (self.t0 - t)).max(step_floor(t));
        let mut snap = false;
        if t + h >= target {
            h = target - t;
            snap = true;
        }
        let drift = self.drift_coef / x - x / (self.t0 - t);
        let (h_used, x1) = guarded_step(t, x, h, drift, self.cfg.max_halvings, &mut self.noise)?;
        let t1 = if snap && h_used == h { target } else { t + h_used };
        self.noise.commit(t1.to_f64_lossy());
        self.point = PathPoint {
            t: t1,
            x: x1,
            integral: integral + self.a / x * h_used,
        };
        Ok(Some(self.point))
    }
}

/// Bridge path stopped at time `stop`; the full path when `stop >= t0 - δ`.
pub fn sample_bridge_until<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x0: T,
    t0: T,
    stop: T,
    cfg: &SdeConfig<T>,
    noise: B,
) -> Result<BesselPath<T>> {
    let mut stepper = BridgeStepper::new(p, x0, t0, cfg, noise)?;
    let limit = if stop >= stepper.cutoff_time() { t0 } else { stop };
    let mut path = BesselPath::start(x0, t0);
    while let Some(pt) = stepper.advance(limit)? {
        path.push(pt);
    }
    Ok(path)
}

/// Full bridge path from `x0` at time 0 to 0 at time `t0`.
pub fn sample_bridge<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x0: T,
    t0: T,
    cfg: &SdeConfig<T>,
    noise: B,
) -> Result<BesselPath<T>> {
    sample_bridge_until(p, x0, t0, t0, cfg, noise)
}

/// Path of `dX = (1 - 2a)/X dt + dW` until it drops below the absorption
/// level (recorded as the absorption time) or reaches the horizon.
pub fn sample_bessel<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x0: T,
    cfg: &SdeConfig<T>,
    mut noise: B,
) -> Result<BesselPath<T>> {
    cfg.validate()?;
    if !(x0 > T::zero() && x0.is_finite()) {
        return Err(Error::Domain(format!("start must be positive, got {x0}")));
    }
    let coef = T::one() - T::lit(2.0) * p.a;
    let absorb = cfg.absorb_level();
    let horizon = cfg.horizon.unwrap_or(T::infinity());
    let f = cfg.step_fraction;
    let mut path = BesselPath::start(x0, T::infinity());
    let (mut t, mut x, mut integral) = (T::zero(), x0, T::zero());
    while t < horizon {
        let mut h = cfg.dt.min(f * x * x).max(step_floor(t));
        let mut t1 = t + h;
        if t1 >= horizon {
            h = horizon - t;
            t1 = horizon;
        }
        let w: T = noise.value(t, h);
        let w1: T = noise.value(t1, h);
        noise.commit(t1.to_f64_lossy());
        let x1 = x + coef / x * h + (w1 - w);
        if !x1.is_finite() {
            return Err(not_finite(t1, x1));
        }
        integral = integral + p.a / x * h;
        if x1 <= absorb {
            path.push(PathPoint {
                t: t1,
                x: T::zero(),
                integral,
            });
            path.absorption_time = Some(t1);
            return Ok(path);
        }
        path.push(PathPoint { t: t1, x: x1, integral });
        t = t1;
        x = x1;
    }
    Ok(path)
}

/// Gap process `X = g_t(x) - U_t` of SLE to infinity with `U = -B`:
/// `dX = a/X dt + dB` on `[0, t_end]`, together with
/// `g_t'(x) = exp(-∫ a/X² ds)` on the same grid.
pub fn sample_gap_to_infinity<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x0: T,
    t_end: T,
    cfg: &SdeConfig<T>,
    noise: B,
) -> Result<(BesselPath<T>, Vec<T>)> {
    sample_gap_until_exit(p, x0, t_end, (T::zero(), T::infinity()), cfg, noise)
}

/// [`sample_gap_to_infinity`] stopped at the first grid point outside the
/// open interval `band`.
pub fn sample_gap_until_exit<T: Scalar, B: BrownianSource>(
    p: &Params<T>,
    x0: T,
    t_end: T,
    band: (T, T),
    cfg: &SdeConfig<T>,
    mut noise: B,
) -> Result<(BesselPath<T>, Vec<T>)> {
    cfg.validate()?;
    if !(x0 > T::zero() && x0.is_finite()) {
        return Err(Error::Domain(format!("start must be positive, got {x0}")));
    }
    let f = cfg.step_fraction;
    let mut path = BesselPath::start(x0, T::infinity());
    let mut gprime = vec![T::one()];
    let (mut t, mut x, mut integral, mut log_gp) = (T::zero(), x0, T::zero(), T::zero());
    while t < t_end && x > band.0 && x < band.1 {
        let mut h = cfg.dt.min(f * x * x).max(step_floor(t));
        let mut snap = false;
        if t + h >= t_end {
            h = t_end - t;
            snap = true;
        }
        let (h_used, x1) = guarded_step(t, x, h, p.a / x, cfg.max_halvings, &mut noise)?;
        let t1 = if snap && h_used == h { t_end } else { t + h_used };
        noise.commit(t1.to_f64_lossy());
        integral = integral + p.a / x * h_used;
        log_gp = log_gp - p.a / (x * x) * h_used;
        path.push(PathPoint { t: t1, x: x1, integral });
        gprime.push(log_gp.exp());
        t = t1;
        x = x1;
    }
    Ok((path, gprime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::SeedStream;

    #[test]
    fn bridge_ends_at_zero_and_stays_positive() {
        let p = Params::new(3.0f64).unwrap();
        let cfg = SdeConfig::new(1e-3);
        let seeds = SeedStream::new(11);
        for i in 0..50 {
            let path = sample_bridge(&p, 1.0, 1.0, &cfg, seeds.brownian(i)).unwrap();
            let n = path.len();
            assert_eq!(path.times[0], 0.0);
            assert_eq!(path.values[0], 1.0);
            assert_eq!(path.times[n - 1], 1.0);
            assert_eq!(path.values[n - 1], 0.0);
            assert!(path.values[..n - 1].iter().all(|&x| x > 0.0));
            assert!(path.times.windows(2).all(|w| w[1] > w[0]));
            assert!(path.drift_integral.windows(2).all(|w| w[1] >= w[0]));
            assert!((path.times[n - 2] - (1.0 - 1e-3)).abs() < 1e-12);
        }
    }

    #[test]
    fn stopped_bridge_is_a_prefix_of_the_full_path() {
        let p = Params::new(4.0f64).unwrap();
        let cfg = SdeConfig::new(1e-3);
        let seeds = SeedStream::new(5);
        let full = sample_bridge(&p, 0.7, 1.0, &cfg, seeds.brownian(3)).unwrap();
        let part = sample_bridge_until(&p, 0.7, 1.0, 0.4, &cfg, seeds.brownian(3)).unwrap();
        assert_eq!(part.end_time(), 0.4);
        let k = part.len() - 2;
        assert_eq!(&part.values[..=k], &full.values[..=k]);
        assert_eq!(&part.times[..=k], &full.times[..=k]);
    }

    #[test]
    fn stepper_respects_limits() {
        let p = Params::new(8.0f64 / 3.0).unwrap();
        let cfg = SdeConfig::new(1e-2);
        let mut s = BridgeStepper::new(&p, 1.0, 1.0, &cfg, SeedStream::new(1).brownian(0)).unwrap();
        while s.advance(0.25).unwrap().is_some() {}
        assert_eq!(s.point().t, 0.25);
        assert!(!s.is_finished());
        while s.advance(2.0).unwrap().is_some() {}
        assert!(s.is_finished());
        assert_eq!(s.point().t, 1.0);
        assert!(s.advance(2.0).unwrap().is_none());
    }

    #[test]
    fn unconditioned_path_absorbs_or_is_censored() {
        let p = Params::new(4.0f64).unwrap();
        let cfg = SdeConfig::new(1e-3).with_horizon(2.0);
        let seeds = SeedStream::new(2);
        let mut absorbed = 0;
        for i in 0..200 {
            let path = sample_bessel(&p, 1.0, &cfg, seeds.brownian(i)).unwrap();
            match path.absorption_time {
                Some(t) => {
                    absorbed += 1;
                    assert_eq!(path.end_time(), t);
                    assert!(t <= 2.0);
                }
                None => assert_eq!(path.end_time(), 2.0),
            }
        }
        // P(T <= 2) = erfc(1/2) ≈ 0.48 at a = 1/2
        assert!((60..140).contains(&absorbed), "{absorbed}");
    }

    #[test]
    fn gap_process_derivative_is_decreasing() {
        let p = Params::new(8.0f64 / 3.0).unwrap();
        let cfg = SdeConfig::new(1e-3);
        let (path, gp) = sample_gap_to_infinity(&p, 1.0, 0.5, &cfg, SeedStream::new(4).brownian(0)).unwrap();
        assert_eq!(path.len(), gp.len());
        assert_eq!(gp[0], 1.0);
        assert!(gp.windows(2).all(|w| w[1] <= w[0] && w[1] > 0.0));
        assert_eq!(path.end_time(), 0.5);
    }

    #[test]
    fn single_precision_bridge() {
        let p = Params::new(4.0f32).unwrap();
        let path = sample_bridge(&p, 1.0f32, 1.0, &SdeConfig::new(1e-3), SeedStream::new(9).brownian(0)).unwrap();
        assert_eq!(*path.values.last().unwrap(), 0.0f32);
        assert!(path.values[..path.len() - 1].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn invalid_inputs() {
        let p = Params::new(4.0f64).unwrap();
        let b = SeedStream::new(0).brownian(0);
        assert!(sample_bridge(&p, -1.0, 1.0, &SdeConfig::new(1e-3), b.clone()).is_err());
        assert!(sample_bridge(&p, 1.0, 1.0, &SdeConfig::new(0.0), b).is_err());
    }
}
