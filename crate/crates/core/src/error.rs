use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("response column `{0}` not found in header")]
    MissingResponse(String),

    #[error("non-numeric cell `{value}` at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value at row {row}, column `{column}` (missing-value policy is reject)")]
    MissingValue { row: usize, column: String },

    #[error("non-binary response value {value} at row {row}")]
    NonBinaryResponse { row: usize, value: f64 },

    #[error("binary response has a single class")]
    SingleClass,

    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("unknown feature name `{0}`")]
    UnknownFeature(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model {0} cannot be estimated: every fold fit failed")]
    UnestimableModel(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("exhaustive enumeration needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("candidate pools exhausted after {drawn} of {wanted} draws")]
    PoolsExhausted { drawn: usize, wanted: usize },

    #[error("dataset fingerprint mismatch: manifest has {expected}, file has {found}")]
    FingerprintMismatch { expected: String, found: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
