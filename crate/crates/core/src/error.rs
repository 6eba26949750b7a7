use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected d={expected}, got d={found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("field is identically zero")]
    ZeroField,

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    /// Mass convolved out of the truncation box exceeded the configured tolerance.
    #[error("escaped mass {escaped:.3e} exceeds tolerance {tolerance:.3e} at t={t}")]
    EscapedMass { t: usize, escaped: f64, tolerance: f64 },

    /// An oriented-percolation trial grew past the active-set budget.
    #[error("active set of {size} sites exceeds budget {budget} at t={t} (p={p} is likely supercritical)")]
    ActiveSetBudget { t: usize, size: usize, budget: usize, p: f64 },

    /// An exhaustive computation was refused up front.
    #[error("estimated cost {estimate:.3e} exceeds cap {cap:.3e}: {what}")]
    CostCap { what: String, estimate: f64, cap: f64 },

    #[error("source run is not exact: {0}")]
    NonExactSource(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::ZeroField
            | Error::NonExactSource(_)
            | Error::Unsupported(_)
            | Error::Json(_) => 2,
            Error::EscapedMass { .. } | Error::ActiveSetBudget { .. } | Error::Degenerate(_) => 3,
            Error::CostCap { .. } => 4,
            Error::Invariant(_) | Error::Io(_) => 5,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
