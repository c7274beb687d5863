use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node `{node}` has no state `{state}` (valid states: {})", valid.join(", "))]
    UnknownState {
        node: String,
        state: String,
        valid: Vec<String>,
    },

    #[error("cycle detected through node `{0}`")]
    Cycle(String),

    #[error("node `{0}` has no value map")]
    NoValueMap(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(ValidationReport),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("impossible evidence: P({0}) = 0")]
    ImpossibleEvidence(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("unsupported structure at node `{node}`: {reason}")]
    UnsupportedStructure { node: String, reason: String },

    #[error("state space of {size} configurations exceeds the enumeration limit of {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },

    #[error("survey: {0}")]
    Survey(String),

    #[error("layout: {0}")]
    Layout(String),

    #[error("no cost entry for component `{0}`")]
    MissingCost(String),

    #[error("component `{0}` is not classified")]
    Unclassified(String),

    #[error("availability profile has no factor for `{0}`")]
    MissingFactor(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
