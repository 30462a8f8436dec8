use thiserror::Error;

/// Invalid or inconsistent configuration, detected at load time.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field} must be a power of two and >= 1 (got {value})")]
    NotPowerOfTwo { field: &'static str, value: u64 },
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// A line-oriented input that could not be parsed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("address {address:#x} outside capacity {capacity:#x}")]
    OutOfRange { address: u64, capacity: u64 },
    #[error("coordinate component {field}={value} outside geometry")]
    BadCoord { field: &'static str, value: u64 },
}

/// Top-level error for simulator entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("in {path}")]
    Trace { path: String, source: ParseError },
    #[error("io error on {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("energy accounting: {0}")]
    Accounting(String),
    #[error("event log out of order at entry {index}: time {time} after {previous}")]
    UnsortedLog {
        index: usize,
        time: u64,
        previous: u64,
    },
    #[error("simulation: {0}")]
    Simulation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
