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

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },

    #[error("non-numeric value {value:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("single-class target")]
    SingleClass,

    #[error("negative effort {value} at row {row}")]
    NegativeEffort { row: usize, value: f64 },

    #[error("ragged matrix: row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("column count mismatch: model expects {expected}, got {found}")]
    ColumnMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parameter {name}: {reason}")]
    Param { name: String, reason: String },

    #[error("d2h undefined: actual labels lack a {0} class")]
    D2hUndefined(&'static str),

    #[error("popt20 needs an effort column")]
    MissingEffort,

    #[error("popt20 undefined: {0}")]
    PoptUndefined(&'static str),

    #[error("no goals")]
    NoGoals,

    #[error("goal mismatch: {0}")]
    GoalMismatch(String),

    #[error("SMOTE needs >= 2 minority instances, found {0}")]
    SmoteTooFew(usize),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Param {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
