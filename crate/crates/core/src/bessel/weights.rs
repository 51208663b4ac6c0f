use serde::Serialize;

use crate::error::{domain, Result};
use crate::scalar::Scalar;

use super::density::ln_first_passage_density;
use super::{BesselPath, Params};

/// `M_t = (X_t/X_0)^{1-3a} g_t'^b`, `N_t = φ(X_t, t0 - t)` (unnormalised) and
/// their product, on the grid of the path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightTrace<T> {
    pub times: Vec<T>,
    #[serde(rename = "M")]
    pub m: Vec<T>,
    #[serde(rename = "N")]
    pub n: Vec<T>,
    #[serde(rename = "M_tilde")]
    pub m_tilde: Vec<T>,
}

/// Weights along `path`. A terminal point `(t0, 0)` of a bridge is dropped;
/// any other nonpositive value is an error.
pub fn weight_trace<T: Scalar>(p: &Params<T>, path: &BesselPath<T>, gprime: &[T], t0: T) -> Result<WeightTrace<T>> {
    if gprime.len() != path.len() {
        return Err(domain(format!(
            "derivative grid has {} points, path has {}",
            gprime.len(),
            path.len()
        )));
    }
    if gprime.first().is_some_and(|&g| g != T::one()) {
        return Err(domain("derivative must start at 1"));
    }
    let mut len = path.len();
    if len > 1 && path.values[len - 1] <= T::zero() && path.times[len - 1] >= path.t0 {
        len -= 1;
    }
    let x0 = path.x0;
    let exponent = T::one() - T::lit(3.0) * p.a;
    let mut out = WeightTrace {
        times: Vec::with_capacity(len),
        m: Vec::with_capacity(len),
        n: Vec::with_capacity(len),
        m_tilde: Vec::with_capacity(len),
    };
    for ((&t, &x), &gp) in path.times.iter().zip(&path.values).zip(gprime).take(len) {
        if x <= T::zero() {
            return Err(domain(format!("nonpositive value {x} at t = {t}")));
        }
        let m = (x / x0).powf(exponent) * gp.powf(p.b);
        let n = if t < t0 {
            ln_first_passage_density(p, x, t0 - t)?.exp()
        } else {
            T::zero()
        };
        out.times.push(t);
        out.m.push(m);
        out.n.push(n);
        out.m_tilde.push(m * n);
    }
    Ok(out)
}
