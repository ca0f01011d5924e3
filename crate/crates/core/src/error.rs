// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("group setup failed: {0}")]
    Setup(String),

    #[error("invalid group parameters: {0}")]
    InvalidGroup(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A value does not fit the signed encoding of the exponent space.
    #[error("value {value} out of range: {reason}")]
    Range { value: i128, reason: String },

    #[error("attribute `{attribute}`: {reason}")]
    Validation { attribute: String, reason: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    /// No exponent in the search window matches the element.
    #[error("discrete log not found in window [{lo}, {hi}]{}", attribute.as_ref().map(|a| format!(" for attribute `{a}`")).unwrap_or_default())]
    Decode {
        lo: i64,
        hi: i64,
        attribute: Option<String>,
    },

    #[error("divergence undefined: {0}")]
    Divergence(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("ingestion failed for {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage labels to expose the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
