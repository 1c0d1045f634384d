//! Process exit statuses. Rejections by the ledger exit with the numeric
//! code of their [`ErrorCode`] (10-24).

use rltrace_core::audit::Verdict;
use rltrace_core::ErrorCode;
use rltrace_node::client::ClientError;

use crate::keystore::KeystoreError;

pub const OK: i32 = 0;
pub const FAILURE: i32 = 1;
/// Clap's status for bad arguments.
pub const USAGE: i32 = 2;
pub const UNREACHABLE: i32 = 3;
pub const NON_COMPLIANT: i32 = 4;
pub const INDETERMINATE: i32 = 5;
pub const CHAIN_INVALID: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{}: {reason}", .code.as_str())]
    Rejected { code: ErrorCode, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Unreachable(String),
    #[error("audit verdict {0}")]
    Verdict(Verdict),
    #[error("audit found a non-compliant system")]
    SystemNonCompliant,
    #[error("stored chain fails verification")]
    ChainInvalid,
    #[error("{0}")]
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Rejected { code, .. } => code.exit_code(),
            Failure::Usage(_) => USAGE,
            Failure::Unreachable(_) => UNREACHABLE,
            Failure::Verdict(Verdict::Indeterminate) => INDETERMINATE,
            Failure::Verdict(_) | Failure::SystemNonCompliant => NON_COMPLIANT,
            Failure::ChainInvalid => CHAIN_INVALID,
            Failure::Other(_) => FAILURE,
        }
    }

    pub fn rejected(code: ErrorCode, reason: impl Into<String>) -> Self {
        Failure::Rejected {
            code,
            reason: reason.into(),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Transport(m) => Failure::Unreachable(m),
            ClientError::Api { error, .. } => Failure::rejected(error.code, error.message),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<KeystoreError> for Failure {
    fn from(e: KeystoreError) -> Self {
        match e {
            KeystoreError::BadName(_) | KeystoreError::Unknown { .. } => Failure::Usage(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<rltrace_core::offchain::OffchainError> for Failure {
    fn from(e: rltrace_core::offchain::OffchainError) -> Self {
        match e.code() {
            Some(code) => Failure::rejected(code, e.to_string()),
            None => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}
