use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("network needs at least one incoming and one outgoing arc ({side} side is empty)")]
    EmptySide { side: &'static str },

    #[error("{what} of arc {arc} must be positive, got {value}")]
    NonPositiveParameter {
        what: &'static str,
        arc: usize,
        value: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid coupling matrix: {0}")]
    InvalidCoupling(String),

    #[error("coefficient assumptions violated: {0}")]
    AssumptionViolated(String),

    #[error("matrix is numerically singular (pivot {pivot:e} below threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("numerical invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid design target: {0}")]
    InvalidTarget(String),

    #[error("no feasible theta: denominator {0:e} is not positive")]
    InfeasibleTheta(f64),

    #[error("coupling search did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid transmission coefficients: {0}")]
    InvalidGamma(String),

    #[error("invalid piecewise field: {0}")]
    InvalidField(String),

    #[error("smoothing transitions do not fit on arc {arc}: {reason}")]
    WidthOverflow { arc: usize, reason: String },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to parse {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::InvariantViolation(_)
                | Error::InfeasibleTheta(_)
                | Error::NoConvergence(_)
                | Error::LinearSolveFailure(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
