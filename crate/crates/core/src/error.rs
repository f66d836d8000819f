use thiserror::Error;

/// Failure taxonomy shared by every module.
///
/// The four top-level classes map onto the runner's exit codes; `Domain`
/// is reported as a configuration failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("nonconvergence: {0}")]
    NonConvergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Json(_) => 2,
            Error::Integrity(_) => 3,
            Error::NonConvergence(_) => 4,
            Error::Io(_) => 5,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Json(_) => "config",
            Error::Integrity(_) => "integrity",
            Error::NonConvergence(_) => "nonconvergence",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
