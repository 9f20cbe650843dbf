use thiserror::Error;

/// Errors raised by the analysis routines.
///
/// Variants split into two families: violated preconditions on the caller's
/// inputs ([`Error::is_numerical`] is false) and numerical failures such as
/// non-convergence or insufficient truncation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("ratio {0} is outside [0, 1]")]
    InvalidRatio(f64),

    #[error("no step count up to the search cap reaches the target")]
    NoSolution,

    #[error("step count {steps} is below the validity threshold {threshold}")]
    BelowValidityThreshold { steps: u128, threshold: u128 },

    #[error("step count {0} is too large for exact iteration")]
    TooManySteps(u128),

    #[error("distribution is not invariant for the kernel (max residual {0:e})")]
    NotInvariant(f64),

    #[error("detailed balance violated (max residual {0:e})")]
    DetailedBalance(f64),

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error(
        "unsupported prior: constants are only available for a = b = 1 (got a = {a}, b = {b})"
    )]
    UnsupportedPrior { a: f64, b: f64 },

    #[error("truncation level too small: tail mass {0:e} is not below 1e-12")]
    TruncationTooSmall(f64),

    #[error("state {state} outside support 0..={max}")]
    StateOutOfRange { state: u64, max: u64 },

    #[error("invalid d: need d >= {min} (got {d})")]
    InvalidD { d: f64, min: f64 },

    #[error("invalid r: need 0 < r < 1 (got {0})")]
    InvalidR(f64),

    #[error("non-contracting parameters: u^r / alpha^(1-r) = {0} exceeds 1")]
    NonContracting(f64),

    #[error("no feasible (d, r) pair in the grid")]
    EmptyFeasibleGrid,

    #[error("scan weight must lie strictly inside (0, 1), got {0}")]
    AlphaBoundary(f64),

    #[error("degenerate coupling equation (mu = 0 and alpha = 1/2)")]
    DegenerateCoupling,

    #[error("word length {0} outside the supported range 1..=20")]
    WordLengthOutOfRange(usize),

    #[error("cannot write output: {0}")]
    Output(String),

    #[error("n = {0} is too large for exact matrix computation (limit 2000)")]
    InfeasibleN(u64),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_) | Error::TruncationTooSmall(_) | Error::NoSolution
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
