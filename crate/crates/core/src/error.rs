use alloc::string::String;

/// Failures surfaced by the numerical core.
///
/// Hypothesis violations in the certificate are *not* errors; they are
/// reported as flags or non-finite values.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sample array has {found} values, grid expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("operation needs a vector field with {expected} components, got {found}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("CFL number {cfl:.3} exceeds limit at t = {t}; try dt <= {advisory_dt:e}")]
    CflViolation { t: f64, cfl: f64, advisory_dt: f64 },
    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { t: f64, what: &'static str },
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("time axis mismatch: {0}")]
    TimeMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
