use thiserror::Error;

use crate::ids::{ChannelId, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown node {0}")]
    NotFound(NodeId),

    #[error("unknown channel {0}")]
    UnknownChannel(ChannelId),

    #[error("deployment generation failed: {0}")]
    GenerationFailure(String),

    #[error("standalone map of {owner} cannot ingest observation from {observer}")]
    ModeViolation { owner: NodeId, observer: NodeId },

    #[error("no channel below busy threshold {threshold}")]
    NoAssignment { threshold: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// The offending config field, when this is a config error.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Config { field, .. } => Some(field),
            _ => None,
        }
    }
}
