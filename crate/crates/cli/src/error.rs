use std::fmt;

pub const REFUSED: i32 = 1;
pub const PARSE: i32 = 2;
pub const VALIDATION: i32 = 3;
pub const QUERY: i32 = 4;
pub const IO: i32 = 5;

/// An error with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn refused(message: impl Into<String>) -> Self {
        Self::new(REFUSED, message)
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(PARSE, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(VALIDATION, message)
    }

    pub fn query(message: impl Into<String>) -> Self {
        Self::new(QUERY, message)
    }

    pub fn io(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        Self::new(IO, format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<tpm::eval::EvalError> for CliError {
    fn from(e: tpm::eval::EvalError) -> Self {
        CliError::query(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
