use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsbError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("infeasible allocation: total {total} exceeds budget {budget}")]
    Infeasible { total: f64, budget: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("knapsack with {0} items is too large for exhaustive search (max 20)")]
    TooManyItems(usize),

    #[error("scaled knapsack capacity overflows: {0}")]
    CapacityOverflow(f64),

    #[error("threshold search already finished")]
    SearchFinished,

    #[error("lower bound undefined: {0}")]
    UndefinedBound(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no traces to emit")]
    EmptyTraces,
}

pub type Result<T, E = CsbError> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> CsbError {
    CsbError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
