use semibp::engine::EngineError;
use semibp::format::FormatError;
use semibp::jtree::JtreeError;
use semibp::oracle::OracleError;
use semibp::tensor::TensorError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_CONTRADICTION: u8 = 4;
pub const EXIT_SIZE_CAP: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Jtree(#[from] JtreeError),
    #[error("{0} checks failed")]
    ChecksFailed(usize),
}

fn engine_code(e: &EngineError) -> (u8, &'static str) {
    match e {
        EngineError::InvalidConfig(_) | EngineError::SemiringNoOrder(_) => (EXIT_USAGE, "usage"),
        EngineError::Contradiction { .. } | EngineError::ZeroMessage { .. } => {
            (EXIT_CONTRADICTION, "contradiction")
        }
        EngineError::Tensor(TensorError::TooLarge { .. }) => (EXIT_SIZE_CAP, "size_cap"),
        _ => (EXIT_INVALID, "validation"),
    }
}

impl CliError {
    /// Exit code and a short machine-readable category.
    pub fn classify(&self) -> (u8, &'static str) {
        match self {
            CliError::Usage(_) => (EXIT_USAGE, "usage"),
            CliError::Io { .. } => (EXIT_INVALID, "io"),
            CliError::Format(FormatError::Validation(_)) => (EXIT_INVALID, "validation"),
            CliError::Format(_) => (EXIT_INVALID, "parse"),
            CliError::Engine(e) => engine_code(e),
            CliError::Oracle(OracleError::TooLarge { .. }) => (EXIT_SIZE_CAP, "size_cap"),
            CliError::Oracle(OracleError::InvalidGraph(_)) => (EXIT_INVALID, "validation"),
            CliError::Jtree(JtreeError::CliqueTooLarge { .. }) => (EXIT_SIZE_CAP, "size_cap"),
            CliError::Jtree(JtreeError::Engine(e)) => engine_code(e),
            CliError::Jtree(JtreeError::UnsupportedMode) => (EXIT_INVALID, "validation"),
            CliError::ChecksFailed(_) => (EXIT_INVALID, "check_failed"),
        }
    }
}
