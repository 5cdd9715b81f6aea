use std::fmt;

/// Crate-wide error type.
///
/// `Guard` marks violations of the documented size guards (the CLI maps these
/// to exit code 3); everything else is a usage, validation, or I/O error
/// (exit code 2). Budget exhaustion is not an error: search operations report
/// it in-band through their result status.
#[derive(Debug)]
pub enum Error {
    /// A size guard was violated (argument outside the supported domain).
    Guard(String),
    /// Invalid argument or input that fails validation.
    Invalid(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Guard(msg) => write!(f, "guard violation: {msg}"),
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
