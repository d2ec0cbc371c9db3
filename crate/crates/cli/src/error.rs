use std::process::ExitCode;

use thiserror::Error;
use vpass_core::recovery::RecoveryError;
use vpass_core::server::client::ClientError;
use vpass_core::server::store::StoreError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or missing inputs.
    #[error("{0}")]
    Usage(String),
    /// Rejections and domain failures.
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        })
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn domain(msg: impl ToString) -> Self {
        CliError::Domain(msg.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(io) => CliError::Io(format!("store: {io}")),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<RecoveryError> for CliError {
    fn from(e: RecoveryError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Io(_) | ClientError::Closed => CliError::Io(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}
