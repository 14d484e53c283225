use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{name}: {0}", name = .0.name())]
    Numeric(fragdiff_core::Error),
    /// Self-checks ran but some failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numeric(_) | CliError::Check(_) => 3,
        }
    }
}

impl From<fragdiff_core::Error> for CliError {
    fn from(e: fragdiff_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(format!("{}: {e}", e.name()))
        } else {
            CliError::Numeric(e)
        }
    }
}
