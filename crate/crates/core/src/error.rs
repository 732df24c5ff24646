use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Invalid configuration values.
    Config(String),
    /// Arguments outside the mathematical domain of an operation.
    Domain(String),
    /// An iterative solver hit its iteration cap.
    Numeric { what: &'static str, residual: f64 },
    /// Observed data contradicts a modelling assumption (e.g. more than B successors).
    ModelAssumption(String),
    /// An operation was called without the data it needs.
    Precondition(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Numeric { what, residual } => {
                write!(f, "{what} did not converge (residual {residual:e})")
            }
            Error::ModelAssumption(msg) => write!(f, "model assumption violated: {msg}"),
            Error::Precondition(msg) => write!(f, "precondition failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! domain_err {
    ($($arg:tt)*) => { $crate::Error::Domain(alloc::format!($($arg)*)) };
}
pub(crate) use {config_err, domain_err};
