use thiserror::Error;

/// Errors produced by the distributions, samplers and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside its documented domain (bad parameter, data
    /// outside the support, malformed configuration value, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerically honest evaluation was impossible: the alternating sum
    /// lost more significant digits than the extended-precision path can
    /// absorb. Callers that can bound the offending term may skip it instead.
    #[error("unstable evaluation: ~{digits_lost:.1} digits lost in {context}")]
    Unstable {
        /// Estimated decimal digits cancelled in the dominant sum.
        digits_lost: f64,
        /// What was being evaluated.
        context: String,
    },

    /// An iterative routine exhausted its iteration budget.
    #[error("no convergence in {context} after {iterations} iterations")]
    NoConvergence { context: String, iterations: u64 },

    /// A numeric operation failed for reasons other than cancellation
    /// (non-finite intermediate, non-positive-definite matrix, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// I/O failure while reading or writing data files.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV input.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed JSON configuration or output.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for [`Error::InvalidArgument`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: `2` for configuration / input errors,
    /// `3` for numeric or convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Unstable { .. } | Error::NoConvergence { .. } | Error::Numeric(_) => 3,
        }
    }
}
