use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("concept label must not be empty")]
    EmptyLabel,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("partition does not cover node {0}")]
    IncompletePartition(NodeId),
    #[error("{0}")]
    Undefined(&'static str),
    #[error("client failure during {stage}: {message}")]
    Client { stage: String, message: String },
    #[error("missing recorded exchange for call `{0}`")]
    MissingExchange(String),
    #[error("malformed trace at line {line}, column {column}: {message}")]
    MalformedTrace {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported trace schema version `{0}`")]
    SchemaVersion(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("missing credentials: {0}")]
    MissingCredentials(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
