//! Crate-wide error type.

use std::fmt;
use std::io;

#[derive(Debug)]
pub enum Error {
    /// A precondition on an operation's arguments was violated.
    InvalidArgument(String),
    /// Division by zero, e.g. inverse filtering with a zero leading tap.
    DivisionByZero(String),
    /// The requested experiment cannot satisfy its constraints.
    Infeasible(String),
    /// An iterative process produced non-finite values.
    Diverged(String),
    /// A file did not match its expected binary or text format.
    Format(String),
    /// Experiment configuration is malformed or inconsistent.
    Config(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DivisionByZero(msg) => write!(f, "division by zero: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Diverged(msg) => write!(f, "diverged: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 io/format, 4 infeasible, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Format(_) => 3,
            Error::Infeasible(_) => 4,
            _ => 1,
        }
    }
}
