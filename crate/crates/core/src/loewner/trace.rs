use num_complex::Complex;

use crate::scalar::Scalar;

use super::{atlas_from_driving, slit_forward, DrivingPath, MapAtlas, MapStep};

/// Tips of the discrete hulls: entry `k` is the tip after `k + 1` steps, the
/// preimage of the top of the `k`-th slit under the first `k` steps.
pub fn trace_tips<T: Scalar>(m: &MapAtlas<T>) -> Vec<Complex<T>> {
    let two_a = T::lit(2.0) * m.a();
    let steps = m.steps();
    (0..steps.len())
        .map(|k| {
            let s = steps[k];
            let top = Complex::new(s.driving, (two_a * s.duration).sqrt());
            m.prefix(k).evaluate_inverse(top)
        })
        .collect()
}

/// Largest distance from `U_0` to a traced tip.
pub fn hull_radius_estimate<T: Scalar>(d: &DrivingPath<T>) -> T {
    let u0 = d.values[0];
    trace_tips(&atlas_from_driving(d))
        .into_iter()
        .fold(T::zero(), |r, z| r.max((z - u0).norm()))
}

/// Builds a Loewner chain from points along a curve by vertical-slit zipping:
/// each new point is pushed through the maps built so far and removed with a
/// vertical slit over its image.
#[derive(Debug, Clone)]
pub struct Zipper<T> {
    atlas: MapAtlas<T>,
    driving: T,
}

impl<T: Scalar> Zipper<T> {
    /// Chain rooted at the real point `start`.
    pub fn new(a: T, start: T) -> Self {
        Self {
            atlas: MapAtlas::identity(a),
            driving: start,
        }
    }

    /// Appends the next curve point. Points whose image falls on the real
    /// line add no capacity.
    pub fn push(&mut self, z: Complex<T>) {
        let two_a = T::lit(2.0) * self.atlas.a();
        let mut w = z;
        for s in self.atlas.steps() {
            w = slit_forward(w, s.driving, two_a * s.duration).0;
        }
        if w.im > T::zero() {
            self.driving = w.re;
            self.atlas.push(MapStep {
                duration: w.im * w.im / two_a,
                driving: w.re,
            });
        }
    }

    pub fn atlas(&self) -> &MapAtlas<T> {
        &self.atlas
    }

    pub fn capacity(&self) -> T {
        self.atlas.total_capacity()
    }

    /// Image of the current tip.
    pub fn driving(&self) -> T {
        self.driving
    }

    pub fn into_atlas(self) -> MapAtlas<T> {
        self.atlas
    }
}

pub fn zip_curve<T: Scalar>(a: T, start: T, points: &[Complex<T>]) -> Zipper<T> {
    let mut z = Zipper::new(a, start);
    for &p in points {
        z.push(p);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn vertical_slit_radius() {
        let d = DrivingPath::new(vec![0.0f64, 0.5, 1.0], vec![0.0; 3], 0.5).unwrap();
        let r = hull_radius_estimate(&d);
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn tips_of_a_generated_curve_zip_back_to_its_driving() {
        let n = 200;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64 * 0.5).collect();
        let values: Vec<f64> = times.iter().map(|t| (9.0 * t).sin() * 0.4).collect();
        let d = DrivingPath::new(times, values, 0.75).unwrap();
        let m = atlas_from_driving(&d);
        let tips = trace_tips(&m);
        let z = zip_curve(0.75, m.steps()[0].driving, &tips);
        assert!((z.capacity() - m.total_capacity()).abs() < 1e-9, "{} {}", z.capacity(), m.total_capacity());
        assert!((z.driving() - m.steps()[n - 1].driving).abs() < 1e-7);
        let p = c(0.3, 1.1);
        assert!((z.atlas().evaluate(p).unwrap() - m.evaluate(p).unwrap()).norm() < 1e-7);
    }

    #[test]
    fn radius_grows_with_time() {
        let n = 100;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| (5.0 * t).cos() - 1.0).collect();
        let mut last = 0.0;
        for m in [10, 25, 50, 100] {
            let d = DrivingPath::new(times[..=m].to_vec(), values[..=m].to_vec(), 0.5).unwrap();
            let r = hull_radius_estimate(&d);
            assert!(r >= last);
            last = r;
        }
    }
}
