use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e} below {threshold:.3e}")]
    NotPositive { eigenvalue: f64, threshold: f64 },

    #[error("trace {trace} is not 1")]
    NotNormalized { trace: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("channel has no Kraus operators")]
    EmptyKraus,

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("operator is not an isometry: defect {0:.3e}")]
    NotIsometric(f64),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} disagree: {lhs} vs {rhs}")]
    Inconsistent { what: &'static str, lhs: f64, rhs: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
