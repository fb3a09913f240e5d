use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("spec {path}: {reason}")]
    Spec { path: String, reason: String },
    #[error("conflicting scale options: {0}")]
    ConflictingScale(String),
    #[error(transparent)]
    Core(#[from] latlab_core::Error),
    #[error("writing {path}: {reason}")]
    Output { path: String, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Spec { .. } => 3,
            CliError::ConflictingScale(_) => 4,
            CliError::Core(_) | CliError::Output { .. } => 1,
        }
    }
}
