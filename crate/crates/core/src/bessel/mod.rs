//! Bessel processes with drift `(1 - 2a)/x` killed at the origin, the bridge
//! conditioned to hit the origin at a fixed time, their densities, and the
//! martingale weights linking SLE to infinity with SLE between two boundary
//! points.

mod density;
mod sde;
mod weights;

pub use density::{
    bridge_density, first_passage_cdf, first_passage_density, ln_first_passage_density,
    ln_transition_density_killed, normalization_constant, transition_density_killed,
};
pub use sde::{
    sample_bessel, sample_bridge, sample_bridge_until, sample_gap_to_infinity, sample_gap_until_exit, BesselPath,
    BridgeStepper, PathPoint, SdeConfig,
};
pub use weights::{weight_trace, WeightTrace};

use serde::Serialize;

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// SLE parameter set: `kappa`, capacity rate `a = 2/kappa`, boundary exponent
/// `b = (3a - 1)/2` and central charge `(6 - kappa)(3 kappa - 8)/(2 kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params<T> {
    pub kappa: T,
    pub a: T,
    pub b: T,
    pub central_charge: T,
}

impl<T: Scalar> Params<T> {
    pub fn new(kappa: T) -> Result<Self> {
        if !(kappa > T::zero() && kappa < T::lit(8.0)) {
            return Err(domain(format!("kappa must lie in (0, 8), got {kappa}")));
        }
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let a = two / kappa;
        Ok(Self {
            kappa,
            a,
            b: (three * a - T::one()) / two,
            central_charge: (T::lit(6.0) - kappa) * (three * kappa - T::lit(8.0)) / (two * kappa),
        })
    }

    /// Guard for operations that need simple curves.
    pub fn require_simple(&self) -> Result<()> {
        if self.kappa > T::lit(4.0) {
            return Err(domain(format!("requires kappa <= 4, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Order of the modified Bessel function in the killed transition density.
    pub fn bessel_index(&self) -> T {
        T::lit(2.0) * self.a - T::lit(0.5)
    }
}
