use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter violates its precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The active/fluid phase does not wrap around the torus in `direction`.
    #[error("percolation failure: {phase} phase does not percolate in direction {direction}")]
    Percolation { direction: usize, phase: &'static str },

    #[error("solver did not converge after {iterations} iterations (last relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("fixed-point iteration did not converge in {sweeps} sweeps (change {change:e}); reduce dt")]
    Step { sweeps: usize, change: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("geometry construction failed: {0}")]
    Geometry(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
