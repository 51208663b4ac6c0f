use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The evaluation point lies in (or numerically on) the hull.
    #[error("point swallowed by the hull at step {step} (t = {time})")]
    Swallowed { step: usize, time: f64 },

    /// The positivity guard kept halving without finding an admissible step.
    #[error("step size too coarse at t = {time}, x = {value} after {halvings} halvings")]
    StepTooCoarse {
        time: f64,
        value: f64,
        halvings: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Sampling(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
