use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A tap vector failed the pmf invariants (negative tap, bad sum, empty).
    #[error("invalid delay characteristic: {0}")]
    InvalidCharacteristic(String),

    /// Filter support exceeds the analysis horizon.
    #[error("filter length {len} exceeds horizon {rho}")]
    FilterTooLong { len: usize, rho: usize },

    /// Matrix/vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A construction parameter is out of its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Least-squares normal equations are singular and no ridge was requested.
    #[error("singular normal equations (smallest singular value of the convolved inputs: {conditioning:.3e})")]
    SingularNormalEquations { conditioning: f64 },

    /// The observation horizon is too short for the estimator.
    #[error("horizon {rho} is shorter than the number of senders {n_senders}")]
    HorizonTooShort { rho: usize, n_senders: usize },

    /// A Monte-Carlo batch hit a singular trial at ridge = 0.
    #[error("Monte-Carlo batch aborted: trial {trial} singular (conditioning {conditioning:.3e})")]
    SingularTrial { trial: usize, conditioning: f64 },

    /// Stage count/length cannot reach the target support.
    #[error("infeasible decomposition: {stages} stages of length {per_stage_len} reach support {reachable}, target needs {required}")]
    InfeasibleDecomposition {
        stages: usize,
        per_stage_len: usize,
        reachable: usize,
        required: usize,
    },

    /// Text record or CSV parsing failure.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
