use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed request: sizes, indices, unsupported options.
    #[error("configuration error: {0}")]
    Config(String),
    /// Inputs are well formed but violate a mathematical precondition.
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
