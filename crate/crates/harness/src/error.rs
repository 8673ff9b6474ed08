use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Rejected before any computation: bad schema, values or combinations.
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        HarnessError::Runtime(msg.into())
    }

    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

impl From<symvqe::Error> for HarnessError {
    fn from(e: symvqe::Error) -> Self {
        match e {
            symvqe::Error::Config(m) | symvqe::Error::Validation(m) => HarnessError::Config(m),
            symvqe::Error::Numerical(m) => HarnessError::Runtime(m),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}
