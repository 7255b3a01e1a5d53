use actdet::harness::{HarnessError, ScenarioError};
use thiserror::Error;

/// Command failure split by exit code: validation problems exit with 2,
/// internal errors with 1.
#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Validation(_) => 2,
            CmdError::Internal(_) => 1,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CmdError::Validation(msg.into())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Internal(e.to_string())
    }
}

impl From<ScenarioError> for CmdError {
    fn from(e: ScenarioError) -> Self {
        CmdError::Validation(e.to_string())
    }
}

impl From<HarnessError> for CmdError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Scenario(s) => CmdError::Validation(s.to_string()),
            other => CmdError::Internal(other.to_string()),
        }
    }
}
