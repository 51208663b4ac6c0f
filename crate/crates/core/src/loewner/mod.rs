//! Chordal Loewner chains with `∂_t g_t(z) = a / (g_t(z) - U_t)`, discretised
//! as compositions of exact vertical-slit maps.

mod trace;

pub use trace::{hull_radius_estimate, trace_tips, zip_curve, Zipper};

use num_complex::Complex;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;

/// Driving function sampled on an increasing grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrivingPath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub a: T,
}

impl<T: Scalar> DrivingPath<T> {
    pub fn new(times: Vec<T>, values: Vec<T>, a: T) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(domain("driving grid and values must be nonempty and of equal length"));
        }
        if times[0] != T::zero() {
            return Err(domain("driving grid must start at 0"));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(domain("driving grid must be strictly increasing"));
        }
        if !values.iter().all(|u| u.is_finite()) {
            return Err(domain("driving values must be finite"));
        }
        if !(a > T::zero()) {
            return Err(domain("capacity rate must be positive"));
        }
        Ok(Self { times, values, a })
    }

    pub fn final_time(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_s |U_s - U_0|`
    pub fn max_excursion(&self) -> T {
        let u0 = self.values[0];
        self.values.iter().fold(T::zero(), |m, &u| m.max((u - u0).abs()))
    }
}

/// One exact step: the slit map for constant driving `driving` over `duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapStep<T> {
    pub duration: T,
    pub driving: T,
}

/// Composition of exact slit maps, applied in order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapAtlas<T> {
    a: T,
    steps: Vec<MapStep<T>>,
    total_capacity: T,
}

fn swallow_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

/// `U + sqrt((w - U)² + c)` on the branch with positive imaginary part.
#[inline]
fn slit_forward<T: Scalar>(w: Complex<T>, u: T, c: T) -> (Complex<T>, Complex<T>) {
    let d = w - u;
    let mut s = (d * d + c).sqrt();
    if s.im < T::zero() || (s.im == T::zero() && (s.re < T::zero()) != (d.re < T::zero())) {
        s = -s;
    }
    (s + u, d / s)
}

/// Inverse slit step `U + sqrt((w - U)² - c)` on the upper branch.
#[inline]
fn slit_inverse<T: Scalar>(w: Complex<T>, u: T, c: T) -> Complex<T> {
    let d = w - u;
    let mut s = (d * d - c).sqrt();
    if s.im < T::zero() || (s.im == T::zero() && (s.re < T::zero()) != (d.re < T::zero())) {
        s = -s;
    }
    s + u
}

impl<T: Scalar> MapAtlas<T> {
    pub fn identity(a: T) -> Self {
        Self {
            a,
            steps: Vec::new(),
            total_capacity: T::zero(),
        }
    }

    pub fn from_steps(a: T, steps: Vec<MapStep<T>>) -> Self {
        let total_capacity = a * steps.iter().map(|s| s.duration).sum::<T>();
        Self { a, steps, total_capacity }
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn steps(&self) -> &[MapStep<T>] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Half-plane capacity `a Σ δ_k`.
    pub fn total_capacity(&self) -> T {
        self.total_capacity
    }

    pub fn push(&mut self, step: MapStep<T>) {
        self.total_capacity = self.total_capacity + self.a * step.duration;
        self.steps.push(step);
    }

    /// `other ∘ self`: apply `self` first. Capacities add.
    pub fn then(&self, other: &MapAtlas<T>) -> Self {
        let mut steps = self.steps.clone();
        if other.a == self.a {
            steps.extend_from_slice(&other.steps);
        } else {
            let ratio = other.a / self.a;
            steps.extend(other.steps.iter().map(|s| MapStep {
                duration: s.duration * ratio,
                driving: s.driving,
            }));
        }
        Self {
            a: self.a,
            steps,
            total_capacity: self.total_capacity + other.total_capacity,
        }
    }

    pub fn prefix(&self, n: usize) -> Self {
        Self::from_steps(self.a, self.steps[..n].to_vec())
    }

    fn apply(&self, z: Complex<T>, want_prime: bool) -> Result<(Complex<T>, Complex<T>)> {
        if !(z.im > T::zero()) {
            return Err(domain(format!("evaluation point {z} not in the upper half-plane")));
        }
        let tol = swallow_tol::<T>();
        let two_a = T::lit(2.0) * self.a;
        let mut w = z;
        let mut prime = Complex::new(T::one(), T::zero());
        let mut elapsed = T::zero();
        for (k, s) in self.steps.iter().enumerate() {
            let (next, factor) = slit_forward(w, s.driving, two_a * s.duration);
            elapsed = elapsed + s.duration;
            if !(next.im >= tol) || !next.re.is_finite() {
                return Err(Error::Swallowed {
                    step: k,
                    time: elapsed.to_f64_lossy(),
                });
            }
            if want_prime {
                prime = prime * factor;
            }
            w = next;
        }
        Ok((w, prime))
    }

    pub fn evaluate(&self, z: Complex<T>) -> Result<Complex<T>> {
        Ok(self.apply(z, false)?.0)
    }

    pub fn evaluate_with_prime(&self, z: Complex<T>) -> Result<(Complex<T>, Complex<T>)> {
        self.apply(z, true)
    }

    /// Evaluates at many points with the steps in the outer loop.
    pub fn evaluate_many(&self, zs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if let Some(z) = zs.iter().find(|z| !(z.im > T::zero())) {
            return Err(domain(format!("evaluation point {z} not in the upper half-plane")));
        }
        let tol = swallow_tol::<T>();
        let two_a = T::lit(2.0) * self.a;
        let mut ws = zs.to_vec();
        let mut elapsed = T::zero();
        for (k, s) in self.steps.iter().enumerate() {
            let c = two_a * s.duration;
            elapsed = elapsed + s.duration;
            for w in ws.iter_mut() {
                let next = slit_forward(*w, s.driving, c).0;
                if !(next.im >= tol) {
                    return Err(Error::Swallowed {
                        step: k,
                        time: elapsed.to_f64_lossy(),
                    });
                }
                *w = next;
            }
        }
        Ok(ws)
    }

    /// Image of a real boundary point and the derivative there. The square
    /// root is taken positive to the right of the driving value and negative
    /// to the left.
    pub fn evaluate_real(&self, x: T) -> Result<(T, T)> {
        let two_a = T::lit(2.0) * self.a;
        let mut w = x;
        let mut prime = T::one();
        let mut elapsed = T::zero();
        let mut side: Option<bool> = None;
        for (k, s) in self.steps.iter().enumerate() {
            let d = w - s.driving;
            elapsed = elapsed + s.duration;
            let right = d > T::zero();
            if d == T::zero() || side.is_some_and(|r| r != right) {
                return Err(Error::Swallowed {
                    step: k,
                    time: elapsed.to_f64_lossy(),
                });
            }
            side = Some(right);
            let root = (d * d + two_a * s.duration).sqrt();
            let root = if right { root } else { -root };
            prime = prime * d / root;
            w = s.driving + root;
        }
        Ok((w, prime))
    }

    /// Inverse map `self⁻¹(w)` for `w` in the upper half-plane (or on the
    /// real line, where it lands on the boundary of the hull).
    pub fn evaluate_inverse(&self, w: Complex<T>) -> Complex<T> {
        let two_a = T::lit(2.0) * self.a;
        let mut z = w;
        for s in self.steps.iter().rev() {
            z = slit_inverse(z, s.driving, two_a * s.duration);
        }
        z
    }
}

/// One exact step per grid interval with midpoint driving values.
pub fn atlas_from_driving<T: Scalar>(d: &DrivingPath<T>) -> MapAtlas<T> {
    let half = T::lit(0.5);
    let steps = d
        .times
        .windows(2)
        .zip(d.values.windows(2))
        .map(|(t, u)| MapStep {
            duration: t[1] - t[0],
            driving: half * (u[0] + u[1]),
        })
        .collect();
    MapAtlas::from_steps(d.a, steps)
}

pub fn evaluate_g<T: Scalar>(m: &MapAtlas<T>, z: Complex<T>) -> Result<Complex<T>> {
    m.evaluate(z)
}

pub fn evaluate_g_prime<T: Scalar>(m: &MapAtlas<T>, z: Complex<T>) -> Result<Complex<T>> {
    Ok(m.evaluate_with_prime(z)?.1)
}

/// First grid time at which `z` is swallowed, `+∞` if it survives.
pub fn swallow_time<T: Scalar>(d: &DrivingPath<T>, z: Complex<T>) -> T {
    if z.im == T::zero() {
        return swallow_time_real(d, z.re);
    }
    match atlas_from_driving(d).evaluate(z) {
        Err(Error::Swallowed { step, .. }) => d.times[step + 1],
        Err(_) => d.times[0],
        Ok(_) => T::infinity(),
    }
}

/// Swallowing time of a real point: the first step at which the driving
/// function crosses its image.
pub fn swallow_time_real<T: Scalar>(d: &DrivingPath<T>, x: T) -> T {
    match atlas_from_driving(d).evaluate_real(x) {
        Err(Error::Swallowed { step, .. }) => d.times[step + 1],
        _ => T::infinity(),
    }
}

/// `|g(z) - z - h/z| · |z|² / (r h)` for hull radius `r` and capacity `h`;
/// bounded on `|z| >= 2r` by a universal constant.
pub fn capacity_distortion_ratio<T: Scalar>(m: &MapAtlas<T>, radius: T, z: Complex<T>) -> Result<T> {
    let h = m.total_capacity();
    let g = m.evaluate(z)?;
    let err = (g - z - Complex::new(h, T::zero()) / z).norm();
    Ok(err * z.norm_sqr() / (radius * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn constant_driving(a: f64, t: f64, n: usize, u: f64) -> DrivingPath<f64> {
        let times = (0..=n).map(|k| t * k as f64 / n as f64).collect();
        DrivingPath::new(times, vec![u; n + 1], a).unwrap()
    }

    #[test]
    fn single_slit_closed_form() {
        let d = constant_driving(0.5, 1.0, 1, 0.0);
        let m = atlas_from_driving(&d);
        assert_eq!(m.len(), 1);
        assert_eq!(m.total_capacity(), 0.5);
        let (g, gp) = m.evaluate_with_prime(c(0.0, 2.0)).unwrap();
        assert!((g - c(0.0, 3f64.sqrt())).norm() < 1e-15);
        assert!((gp - c(2.0 / 3f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn composed_slits_reproduce_one_slit() {
        let one = atlas_from_driving(&constant_driving(0.75, 0.8, 1, 0.3));
        let many = atlas_from_driving(&constant_driving(0.75, 0.8, 500, 0.3));
        for z in [c(0.0, 0.5), c(1.0, 0.1), c(-2.0, 3.0), c(0.3, 1.2)] {
            let (a, b) = (one.evaluate(z).unwrap(), many.evaluate(z).unwrap());
            assert!((a - b).norm() < 1e-10 * a.norm(), "{z}: {a} {b}");
        }
    }

    #[test]
    fn identity_and_composition() {
        let d = DrivingPath::new(vec![0.0], vec![0.4], 0.5).unwrap();
        let m = atlas_from_driving(&d);
        assert!(m.is_empty());
        assert_eq!(m.total_capacity(), 0.0);
        assert_eq!(m.evaluate(c(0.1, 0.2)).unwrap(), c(0.1, 0.2));
        let a = atlas_from_driving(&constant_driving(0.5, 0.3, 3, 0.0));
        let b = atlas_from_driving(&constant_driving(0.5, 0.4, 2, 1.0));
        let ab = a.then(&b);
        assert!((ab.total_capacity() - 0.35).abs() < 1e-15);
        let z = c(0.2, 1.5);
        assert_eq!(ab.evaluate(z).unwrap(), b.evaluate(a.evaluate(z).unwrap()).unwrap());
    }

    #[test]
    fn slit_swallow_time() {
        let a = 0.5;
        let d = constant_driving(a, 2.0, 2000, 0.0);
        let y = 1.2f64;
        let want = y * y / (2.0 * a);
        let got = swallow_time(&d, c(0.0, y));
        assert!((got - want).abs() <= 1e-3 + 1e-12, "{got} vs {want}");
        assert!(swallow_time(&d, c(0.0, 2.01)).is_infinite());
        assert!(swallow_time(&d, c(5.0, 0.0)).is_infinite());
    }

    #[test]
    fn real_points_and_inverse() {
        let d = constant_driving(0.5, 1.0, 1, 0.0);
        let m = atlas_from_driving(&d);
        let (g, gp) = m.evaluate_real(2.0).unwrap();
        assert!((g - 5f64.sqrt()).abs() < 1e-15 && (gp - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        let (g, _) = m.evaluate_real(-2.0).unwrap();
        assert!((g + 5f64.sqrt()).abs() < 1e-15);
        // slit tip maps to the driving point
        let tip = m.evaluate_inverse(c(0.0, 0.0));
        assert!((tip - c(0.0, 1.0)).norm() < 1e-15);
        let z = c(0.4, 0.9);
        let back = m.evaluate_inverse(m.evaluate(z).unwrap());
        assert!((back - z).norm() < 1e-13);
    }

    fn wiggly(n: usize) -> DrivingPath<f64> {
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let values = times.iter().map(|t| (7.0 * t).sin() * 0.8 + 0.3 * t).collect();
        DrivingPath::new(times, values, 0.75).unwrap()
    }

    #[test]
    fn capacity_from_asymptotics() {
        let m = atlas_from_driving(&wiggly(400));
        for z in [c(1e3, 0.0), c(0.0, 1e3), c(-700.0, 700.0)] {
            let z = if z.im == 0.0 { c(z.re, 1.0) } else { z };
            let g = m.evaluate(z).unwrap();
            let cap = (z * (g - z)).re;
            assert!((cap - 0.75).abs() < 1e-3 * 0.75, "{cap}");
            let gp = evaluate_g_prime(&m, z).unwrap();
            assert!((gp - 1.0).norm() < 1e-3);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let m = atlas_from_driving(&wiggly(300));
        let eps = 1e-5;
        for k in 0..10 {
            let z = c(-2.0 + 0.4 * k as f64, 1.3 + 0.1 * k as f64);
            let fd = (m.evaluate(z + eps).unwrap() - m.evaluate(z - eps).unwrap()) / (2.0 * eps);
            let gp = evaluate_g_prime(&m, z).unwrap();
            assert!((gp - fd).norm() < 1e-6, "{z}: {gp} vs {fd}");
        }
    }

    #[test]
    fn many_points_agree_with_single_evaluation() {
        let m = atlas_from_driving(&wiggly(100));
        let zs = [c(0.0, 2.0), c(1.0, 1.6), c(-1.0, 1.7)];
        let batch = m.evaluate_many(&zs).unwrap();
        for (z, g) in zs.iter().zip(batch) {
            assert_eq!(m.evaluate(*z).unwrap(), g);
        }
        assert!(m.evaluate_many(&[c(0.0, -1.0)]).is_err());
    }

    #[test]
    fn single_precision_atlas() {
        let d = DrivingPath::new(vec![0.0f32, 0.5, 1.0], vec![0.0, 0.1, 0.0], 0.5).unwrap();
        let g = atlas_from_driving(&d).evaluate(Complex::new(0.0f32, 2.0)).unwrap();
        assert!((g.im - 3f32.sqrt()).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn maps_into_upper_half_plane(
            us in proptest::collection::vec(-1.0f64..1.0, 2..40),
            re in -3.0f64..3.0,
            im in 0.01f64..3.0,
        ) {
            let n = us.len() - 1;
            let times = (0..=n).map(|k| k as f64 / n as f64).collect();
            let d = DrivingPath::new(times, us, 0.5).unwrap();
            let m = atlas_from_driving(&d);
            match m.evaluate(c(re, im)) {
                Ok(g) => prop_assert!(g.im > 0.0),
                Err(Error::Swallowed { .. }) => prop_assert!(im * im <= 2.0 * m.total_capacity() + 1e-9),
                Err(e) => prop_assert!(false, "{e}"),
            }
            // above the height bound nothing is swallowed
            let high = c(re, (2.0 * m.total_capacity()).sqrt() + 1e-6);
            prop_assert!(m.evaluate(high).is_ok());
        }

        #[test]
        fn composition_adds_capacity(t1 in 0.01f64..2.0, t2 in 0.01f64..2.0, a in 0.3f64..2.0) {
            let m1 = atlas_from_driving(&constant_driving(a, t1, 3, 0.1));
            let m2 = atlas_from_driving(&constant_driving(a, t2, 5, -0.2));
            let tot = m1.then(&m2).total_capacity();
            prop_assert!((tot - a * (t1 + t2)).abs() <= 1e-12 * tot);
        }
    }
}
