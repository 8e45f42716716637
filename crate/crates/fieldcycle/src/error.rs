//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::model::AgentPath;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the model, solver, density and sampling routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An argument lies outside the domain of the evaluated function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A denominator or determinant vanished.
    #[error("singularity: {0} vanishes")]
    Singularity(String),

    /// An iterative solver did not reach its tolerance.
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// The requested phase does not exist for these parameters.
    #[error("infeasible phase: {0}")]
    Infeasible(String),

    /// Inputs have incompatible grids or lengths.
    #[error("shape error: {0}")]
    Shape(String),

    /// An integrated trajectory left the domain of the dynamics.
    #[error("trajectory terminated at t = {time}: {reason}")]
    TrajectoryTerminated {
        time: f64,
        reason: String,
        partial: Box<AgentPath>,
    },

    /// Malformed configuration or data file.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV reader or writer failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than by numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::Domain(_)
                | Error::Parse(_)
                | Error::Shape(_)
                | Error::Io(_)
        )
    }
}
