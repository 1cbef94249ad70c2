use thiserror::Error;

/// Failures mapped onto the process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid input: exit 2.
    #[error("{0}")]
    Input(String),
    /// A numerical stage failed: exit 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<turnpike::Error> for CliError {
    fn from(e: turnpike::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
