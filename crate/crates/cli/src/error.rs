use thiserror::Error;

/// Failure of a CLI command, classified by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numeric: {0}")]
    Numeric(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }
}

impl From<dtofkit::Error> for CliError {
    fn from(err: dtofkit::Error) -> Self {
        use dtofkit::Error as E;
        let msg = err.to_string();
        match err {
            e if e.is_io() => CliError::Io(msg),
            E::EmptyMask | E::Degenerate(_) => CliError::Numeric(msg),
            _ => CliError::Validation(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            CliError::Io(err.to_string())
        } else {
            CliError::Validation(err.to_string())
        }
    }
}
