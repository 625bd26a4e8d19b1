use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("occupation {n} does not fit into {n_bits} bits")]
    Overflow { n: u64, n_bits: usize },

    #[error("invalid bit value {0} (expected 0 or 1)")]
    InvalidBit(u8),

    #[error("invalid bit count {0} (expected 1..={max})", max = crate::bits::MAX_BITS)]
    InvalidBitCount(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no steady state after {time} ps (residual {residual:e} ps^-1)")]
    NoConvergence { time: f64, residual: f64 },

    #[error(
        "steady-state system is singular or has a degenerate null space (residual {residual:e})"
    )]
    SingularSystem { residual: f64 },

    #[error("state became unphysical at t = {time} ps: {reason}")]
    Unphysical { time: f64, reason: String },

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: usize, what: String },

    #[error("steady-state methods disagree on {quantity}: difference {difference:e}")]
    MethodMismatch { quantity: String, difference: f64 },

    #[error("distribution domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status for the CLI: 2 config, 3 convergence or numerics, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::Overflow { .. }
            | Error::InvalidBit(_)
            | Error::InvalidBitCount(_)
            | Error::DimensionMismatch { .. } => 2,
            Error::NoConvergence { .. }
            | Error::SingularSystem { .. }
            | Error::Unphysical { .. }
            | Error::NonFinite { .. }
            | Error::MethodMismatch { .. }
            | Error::Domain(_) => 3,
            Error::Checkpoint { .. } | Error::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
