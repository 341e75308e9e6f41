use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A queue in the offloading chain would be unstable.
    #[error("stability violation: {0}")]
    Unstable(String),

    /// No transmission rate or offloading probability can meet the QoS target.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A bracket handed to a root finder has no sign change.
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    /// Every grid sample of an objective was non-finite.
    #[error("objective is non-finite on every grid point of [{lo}, {hi}]")]
    NoFiniteSample { lo: f64, hi: f64 },

    /// A problem instance is too large for exhaustive enumeration.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// Input data violates a structural invariant.
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
