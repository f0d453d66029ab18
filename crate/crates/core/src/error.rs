// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

use thiserror::Error;

/// Errors surfaced by the classifiers, the workload readers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("duplicate rule id {0}")]
    DuplicateRule(u64),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("rule #{index}: {msg}")]
    Malformed { index: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
