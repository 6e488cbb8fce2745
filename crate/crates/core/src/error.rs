use thiserror::Error;

/// Errors raised anywhere in the twin.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Three points that do not form a usable triangle.
    #[error("degenerate triangle: {0}")]
    DegenerateTriangle(String),

    /// The rendered module does not fit inside the camera frame.
    #[error("module out of view: {0}")]
    OutOfView(String),

    /// The vision pipeline found nothing that looks like the module.
    #[error("no module detected: {0}")]
    NoModuleDetected(String),

    /// A parameter block violates one of its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A malformed image, config file or CSV log.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
