use thiserror::Error;

use crate::model::JobId;
use crate::rational::TimeValue;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("scheduler contract violated at t={time}: {detail}")]
    ContractViolation { time: TimeValue, detail: String },

    #[error("trace incomplete: job {0} never completed")]
    IncompleteTrace(JobId),

    #[error("unsupported trace: {0}")]
    UnsupportedTrace(String),

    #[error("traces are over different instances")]
    MismatchedInstances,

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
