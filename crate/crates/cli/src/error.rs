use serde::{Deserialize, Serialize};
use thiserror::Error;

use gridbn_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, ApiError>;

/// Whether a failure is the caller's fault or the model's answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Domain,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ApiError {
    pub kind: Kind,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn usage(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            kind: Kind::Usage,
            code,
            message: message.into(),
        }
    }

    pub fn domain(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            kind: Kind::Domain,
            code,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Usage => 2,
            Kind::Domain | Kind::Internal => 1,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: ErrorDetail {
                code: self.code.to_string(),
                message: self.message.clone(),
            },
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        let (kind, code) = match &e {
            CoreError::UnknownNode(_) => (Kind::Usage, "unknown_node"),
            CoreError::UnknownState { .. } => (Kind::Usage, "unknown_state"),
            CoreError::InvalidEvidence(_) => (Kind::Usage, "invalid_evidence"),
            CoreError::Parameter(_) => (Kind::Usage, "invalid_parameter"),
            CoreError::ImpossibleEvidence(_) => (Kind::Domain, "impossible_evidence"),
            CoreError::MissingCost(_) => (Kind::Domain, "missing_cost"),
            CoreError::Unclassified(_) => (Kind::Domain, "unclassified_component"),
            CoreError::MissingFactor(_) => (Kind::Domain, "missing_availability_factor"),
            CoreError::Survey(_) => (Kind::Domain, "invalid_survey"),
            CoreError::Layout(_) => (Kind::Domain, "invalid_layout"),
            CoreError::InvalidNetwork(_) | CoreError::Cycle(_) => (Kind::Domain, "invalid_network"),
            CoreError::NoValueMap(_) => (Kind::Domain, "no_value_map"),
            CoreError::UnsupportedStructure { .. } => (Kind::Domain, "unsupported_structure"),
            CoreError::StateSpaceTooLarge { .. } => (Kind::Domain, "state_space_too_large"),
            CoreError::Json(_) => (Kind::Domain, "invalid_json"),
            CoreError::Io { .. } => (Kind::Domain, "io"),
        };
        ApiError {
            kind,
            code,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

/// `{"error": {"code": ..., "message": ...}}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}
