use thiserror::Error;

/// Errors raised by the block kernels, the solvers and the CBX reader.
///
/// Row, column and token indices are 1-based, matching how block rows and
/// file positions are reported to users.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("singular block: pivot below threshold at column {column}")]
    SingularBlock { column: usize },

    #[error("singular banded operator: pivot block at block row {row} is singular")]
    SingularPivot { row: usize },

    #[error("singular capacitance matrix of order {order}")]
    SingularCapacitance { order: usize },

    #[error("singular dense system: pivot below threshold at column {column}")]
    SingularDense { column: usize },

    #[error("format error at token {token}: {message}")]
    Format { token: usize, message: String },

    #[error("non-finite value at token {token}")]
    NonFiniteToken { token: usize },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// True for the numerical-singularity family (CLI exit code 2).
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            Error::SingularBlock { .. }
                | Error::SingularPivot { .. }
                | Error::SingularCapacitance { .. }
                | Error::SingularDense { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
