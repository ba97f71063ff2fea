use std::fmt;

/// Crate-wide error type.
///
/// Kept `Clone` so completion handles can hand the same failure to every
/// waiter; I/O errors are therefore captured as messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are inconsistent with the requested operation.
    ShapeMismatch(String),
    /// A problem was submitted to an engine that cannot stage it.
    CapacityExceeded {
        engine_id: u32,
        size: usize,
        capacity: usize,
    },
    /// An engine descriptor or registry operation is invalid.
    EngineConfig(String),
    /// A dispatch policy is invalid or cannot serve the problem.
    PolicyConfig(String),
    /// Text input (fixture, CSV, JSON) could not be parsed.
    Parse(String),
    /// Filesystem failure, captured as a message.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::CapacityExceeded {
                engine_id,
                size,
                capacity,
            } => write!(
                f,
                "engine {engine_id}: problem size {size} exceeds capacity {capacity}"
            ),
            Error::EngineConfig(msg) => write!(f, "engine configuration: {msg}"),
            Error::PolicyConfig(msg) => write!(f, "dispatch policy: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
