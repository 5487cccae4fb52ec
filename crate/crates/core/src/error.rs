use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid mismatch: expected {expected} points, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("treatment contrast unavailable: {0}")]
    NoContrast(String),

    #[error("exp overflow in inverse transform at grid point {index} (t = {t})")]
    Overflow { index: usize, t: f64 },

    #[error("singular design (condition number {condition:.3e}); offending columns: {columns:?}")]
    SingularDesign { condition: f64, columns: Vec<String> },

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("too many failed bootstrap replicates: {failed} of {total}")]
    ReplicateFailures { failed: usize, total: usize },

    #[error("too many failed simulation runs: {failed} of {total}")]
    RunFailures { failed: usize, total: usize },
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::SingularDesign { .. }
                | Error::Degenerate(_)
                | Error::ReplicateFailures { .. }
                | Error::RunFailures { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
