use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("bit sequence exhausted after {consumed} queries")]
    Exhausted { consumed: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, used by the CLI for error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Capacity(_) => "capacity",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
            Error::Unsupported(_) => "unsupported",
            Error::Exhausted { .. } => "exhausted",
            Error::Precondition(_) => "precondition",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code for the category; 0 is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Precondition(_) => 2,
            Error::Capacity(_) => 3,
            Error::Numeric(_) => 4,
            Error::Config(_) | Error::Unsupported(_) => 5,
            Error::Exhausted { .. } => 6,
            Error::Parse { .. } | Error::Json(_) => 7,
            Error::Io(_) => 8,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
