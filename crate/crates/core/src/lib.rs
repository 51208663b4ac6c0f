//! Simulation of chordal SLE between two boundary points with prescribed
//! half-plane capacity, and Monte Carlo checks of its reversibility.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod error;
pub mod experiments;
pub mod loewner;
pub mod noise;
pub mod quad;
pub mod sampler;
pub mod scalar;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex;
pub use scalar::Scalar;

pub type Params64 = bessel::Params<f64>;
pub type Params32 = bessel::Params<f32>;
pub type MapAtlas64 = loewner::MapAtlas<f64>;
pub type MapAtlas32 = loewner::MapAtlas<f32>;
