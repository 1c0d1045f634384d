use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable, machine-readable failure codes shared by the library, the node
/// API and the CLI exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    PermissionDenied,
    AlreadyExists,
    InvalidBom,
    InvalidTransition,
    NotFound,
    MissingRecord,
    NoProgress,
    InvalidPayload,
    BadSignature,
    BadNonce,
    Serialization,
    TooLarge,
    IntegrityFailure,
    OutOfRange,
    Scheduling,
}

impl ErrorCode {
    pub const ALL: &'static [ErrorCode] = &[
        ErrorCode::PermissionDenied,
        ErrorCode::AlreadyExists,
        ErrorCode::InvalidBom,
        ErrorCode::InvalidTransition,
        ErrorCode::NotFound,
        ErrorCode::MissingRecord,
        ErrorCode::NoProgress,
        ErrorCode::InvalidPayload,
        ErrorCode::BadSignature,
        ErrorCode::BadNonce,
        ErrorCode::Serialization,
        ErrorCode::TooLarge,
        ErrorCode::IntegrityFailure,
        ErrorCode::OutOfRange,
        ErrorCode::Scheduling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::PermissionDenied => "PERMISSION_DENIED",
            ErrorCode::AlreadyExists => "ALREADY_EXISTS",
            ErrorCode::InvalidBom => "INVALID_BOM",
            ErrorCode::InvalidTransition => "INVALID_TRANSITION",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::MissingRecord => "MISSING_RECORD",
            ErrorCode::NoProgress => "NO_PROGRESS",
            ErrorCode::InvalidPayload => "INVALID_PAYLOAD",
            ErrorCode::BadSignature => "BAD_SIGNATURE",
            ErrorCode::BadNonce => "BAD_NONCE",
            ErrorCode::Serialization => "SERIALIZATION",
            ErrorCode::TooLarge => "TOO_LARGE",
            ErrorCode::IntegrityFailure => "INTEGRITY_FAILURE",
            ErrorCode::OutOfRange => "OUT_OF_RANGE",
            ErrorCode::Scheduling => "SCHEDULING",
        }
    }

    /// Process exit status used by the CLI. 0, 1 and 2 are reserved for
    /// success, generic failure and usage errors.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::PermissionDenied => 10,
            ErrorCode::AlreadyExists => 11,
            ErrorCode::InvalidBom => 12,
            ErrorCode::InvalidTransition => 13,
            ErrorCode::NotFound => 14,
            ErrorCode::MissingRecord => 15,
            ErrorCode::NoProgress => 16,
            ErrorCode::InvalidPayload => 17,
            ErrorCode::BadSignature => 18,
            ErrorCode::BadNonce => 19,
            ErrorCode::Serialization => 20,
            ErrorCode::TooLarge => 21,
            ErrorCode::IntegrityFailure => 22,
            ErrorCode::OutOfRange => 23,
            ErrorCode::Scheduling => 24,
        }
    }

    pub fn parse(s: &str) -> Option<ErrorCode> {
        ErrorCode::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
