use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit count {n} outside supported range 1..={max}")]
    QubitCount { n: usize, max: usize },

    #[error("dense conversion refused: {n} qubits exceeds oracle cap {cap}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("enumeration refused: {count} configurations exceeds guard {guard}")]
    EnumerationGuard { count: u128, guard: u128 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used in CLI error output and sweep rows.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::QubitCount { .. } => "qubit_count",
            Error::OracleCapExceeded { .. } => "oracle_cap",
            Error::EnumerationGuard { .. } => "enumeration_guard",
            Error::InvalidInstance(_) => "invalid_instance",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotHermitian(_) => "not_hermitian",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
