use thiserror::Error;

use crate::potentials::SingularSet;

pub type Result<T> = std::result::Result<T, WaveError>;

/// Every failure a solver can report. The CLI maps the variants onto exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum WaveError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("singular denominator: {0}")]
    SingularDenominator(String),

    #[error("singular region at E = {energy}: {} location(s)", set.locations.len())]
    SingularRegion { energy: f64, set: SingularSet },

    #[error("non-hyperbolic regime: coefficient s(x) <= 0 on {} interval(s)", regions.len())]
    NonHyperbolic { regions: Vec<(f64, f64)> },

    #[error("singular coefficient: E = 2V at {locations:?}")]
    SingularCoefficient { locations: Vec<f64> },

    #[error("no convergence after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("state tracking lost: expected {expected} nodes, found {found}")]
    StateTracking { expected: usize, found: usize },

    #[error("no root in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("unstable time stepping at step {step}: norm grew by {growth:.3e}; reduce dt")]
    Stability { step: usize, growth: f64 },
}

impl WaveError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        WaveError::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        WaveError::Usage(msg.into())
    }
}
