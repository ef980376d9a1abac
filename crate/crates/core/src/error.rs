use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Truncated norm deficit exceeds the configured tolerance.
    #[error("cutoff too small: leakage {leakage:.3e} >= tolerance {tolerance:.3e} at cutoff {cutoff}")]
    CutoffTooSmall { leakage: f64, tolerance: f64, cutoff: usize },

    #[error("photon number {n} out of range for cutoff {cutoff}")]
    IndexOutOfRange { n: usize, cutoff: usize },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    /// Probability mass inside the quadrature grid is too small.
    #[error("quadrature grid too small: captured mass {mass:.9} of {total:.9}")]
    GridTooSmall { mass: f64, total: f64 },

    #[error("outcome {value} has vanishing density {density:.3e}")]
    ZeroDensity { value: f64, density: f64 },

    #[error("length mismatch: {what}: {left} vs {right}")]
    LengthMismatch { what: &'static str, left: usize, right: usize },

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("insufficient sample: {got} < {need}")]
    InsufficientSample { got: usize, need: usize },

    #[error("scan budget exceeded: {points} points > budget {budget}")]
    BudgetExceeded { points: usize, budget: usize },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { field, reason: reason.into() }
    }

    /// True for the truncation and grid guards, i.e. numerical rather than
    /// configuration failures.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(self, Error::CutoffTooSmall { .. } | Error::GridTooSmall { .. } | Error::ZeroDensity { .. })
    }
}
