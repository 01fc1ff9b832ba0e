use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Solver(#[from] hcir_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 2 for bad input, 3 for numerical failure, 1 for
    /// I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Solver(hcir_core::Error::Validation(_)) => 2,
            CliError::Solver(hcir_core::Error::OutOfDomain { .. }) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

impl From<hcir_core::ValidationError> for CliError {
    fn from(e: hcir_core::ValidationError) -> Self {
        CliError::validation(e.field(), e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
