use thiserror::Error;

/// Exit codes: 0 success, 1 failed suite or internal error, 2 input or
/// validation error, 3 optimizer non-convergence.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),

    #[error("{0}")]
    Io(String),

    #[error("computation failed: {0}")]
    Internal(String),
}

impl CliError {
    pub fn input(e: qchan::Error) -> Self {
        Self::Input(e.to_string())
    }

    pub fn internal(e: qchan::Error) -> Self {
        Self::Internal(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Io(_) | Self::Internal(_) => 1,
        }
    }
}

/// Outcome of a command that produced its output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
    SuiteFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::SuiteFailed => 1,
            Self::NotConverged => 3,
        }
    }
}
