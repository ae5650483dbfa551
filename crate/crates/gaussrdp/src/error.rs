use std::path::PathBuf;

use gaussrdp_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{}: line {line}, field {field}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        field: usize,
        message: String,
    },
    #[error("infeasible query: {0}")]
    Infeasible(CoreError),
    #[error("solver did not converge: {0}")]
    Convergence(CoreError),
    #[error("invalid input: {0}")]
    Model(CoreError),
    #[error("verification failed")]
    VerifyFailed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::VerifyFailed => 4,
            _ => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InfeasibleQuery { .. } => CliError::Infeasible(e),
            CoreError::ConvergenceFailure { .. }
            | CoreError::NoBracket { .. }
            | CoreError::LineSearchFailure { .. }
            | CoreError::InfeasibleSeed
            | CoreError::NonPsd { .. } => CliError::Convergence(e),
            _ => CliError::Model(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
