use crate::error::{domain, Result};
use crate::scalar::Scalar;
use crate::special::{gamma_q, ln_bessel_i_scaled, ln_gamma};

use super::Params;

fn positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `Z(a) = 2^{2a-1/2} Γ(2a - 1/2)`, the total mass of `t ↦ φ(x, t)`.
pub fn normalization_constant<T: Scalar>(p: &Params<T>) -> Result<T> {
    let nu = p.bessel_index();
    if nu <= T::zero() {
        return Err(domain(format!("normalisation diverges for a = {} <= 1/4", p.a)));
    }
    Ok((nu * T::LN_2() + ln_gamma(nu)).exp())
}

/// `ln φ(x, t)` with `φ(x, t) = x^{4a-1} t^{-1/2-2a} e^{-x²/2t}` (unnormalised).
pub fn ln_first_passage_density<T: Scalar>(p: &Params<T>, x: T, t: T) -> Result<T> {
    positive("x", x)?;
    positive("t", t)?;
    let four_a = T::lit(4.0) * p.a;
    Ok((four_a - T::one()) * x.ln() - (T::lit(0.5) + T::lit(2.0) * p.a) * t.ln() - x * x / (T::lit(2.0) * t))
}

/// Density of the hitting time of 0 for the process started at `x`,
/// evaluated at `t`. With `normalized = false` the constant `Z(a)` is dropped.
pub fn first_passage_density<T: Scalar>(p: &Params<T>, x: T, t: T, normalized: bool) -> Result<T> {
    let ln = ln_first_passage_density(p, x, t)?;
    if normalized {
        Ok((ln - normalization_constant(p)?.ln()).exp())
    } else {
        Ok(ln.exp())
    }
}

/// `P(T <= t)` for the hitting time started at `x`: the regularised upper
/// incomplete gamma `Q(2a - 1/2, x²/2t)`.
pub fn first_passage_cdf<T: Scalar>(p: &Params<T>, x: T, t: T) -> Result<T> {
    positive("x", x)?;
    positive("t", t)?;
    let nu = p.bessel_index();
    if nu <= T::zero() {
        return Err(domain(format!("hitting time is not a.s. finite for a = {}", p.a)));
    }
    Ok(gamma_q(nu, x * x / (T::lit(2.0) * t)))
}

/// `ln q_t(x, y)` for the process killed at the origin.
pub fn ln_transition_density_killed<T: Scalar>(p: &Params<T>, t: T, x: T, y: T) -> Result<T> {
    positive("t", t)?;
    positive("x", x)?;
    positive("y", y)?;
    let nu = p.bessel_index().abs();
    let mu = T::lit(0.5) - T::lit(2.0) * p.a;
    let d = x - y;
    Ok((y / t).ln() + mu * (y / x).ln() - d * d / (T::lit(2.0) * t) + ln_bessel_i_scaled(nu, x * y / t))
}

/// Transition density `q_t(x, y)` of `dX = (1 - 2a)/X dt + dW` killed at 0.
pub fn transition_density_killed<T: Scalar>(p: &Params<T>, t: T, x: T, y: T) -> Result<T> {
    Ok(ln_transition_density_killed(p, t, x, y)?.exp())
}

/// Marginal density at time `t` of the bridge from `x` conditioned to hit 0
/// at `t0`: `q_t(x, y) φ(y, t0 - t) / φ(x, t0)`.
pub fn bridge_density<T: Scalar>(p: &Params<T>, t: T, x: T, y: T, t0: T) -> Result<T> {
    if !(t > T::zero() && t < t0) {
        return Err(domain(format!("bridge time {t} outside (0, {t0})")));
    }
    let ln = ln_transition_density_killed(p, t, x, y)? + ln_first_passage_density(p, y, t0 - t)?
        - ln_first_passage_density(p, x, t0)?;
    Ok(ln.exp())
}
