use thiserror::Error;

/// Failures of a harness command, split by exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid configuration, arguments or incompatible inputs (exit code 1).
    #[error("configuration error: {0}")]
    Config(String),
    /// Anything that failed while running (exit code 2).
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        Self::Runtime(format!("{context}: {e}"))
    }
}
