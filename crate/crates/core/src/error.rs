use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header in column {column}: {message}")]
    Format { column: String, message: String },

    #[error("cannot parse case count {value:?} at row {row}, column {column}")]
    Parse {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("duplicate region key {0:?}")]
    DuplicateKey(String),

    #[error("requested range {start}..{end} is outside the available data {first}..{last}")]
    Range {
        start: NaiveDate,
        end: NaiveDate,
        first: NaiveDate,
        last: NaiveDate,
    },

    #[error("insufficient data for {context}: need at least {needed} points, got {got}")]
    InsufficientData {
        context: String,
        needed: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient structure: {0}")]
    InsufficientStructure(String),

    #[error("node {0} is not covered by the assignment")]
    Coverage(usize),

    #[error("network has {nodes} nodes; exhaustive search supports at most {max}")]
    Size { nodes: usize, max: usize },

    #[error("cannot compare partitions: {0}")]
    Comparison(String),

    #[error("cannot align labels: {0}")]
    Alignment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InsufficientData { .. } | Error::InsufficientStructure(_) => 3,
            Error::Output { .. } => 1,
            _ => 2,
        }
    }

    /// Short stable identifier for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Parse { .. } => "parse",
            Error::DuplicateKey(_) => "duplicate_key",
            Error::Range { .. } => "range",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Parameter(_) => "parameter",
            Error::InsufficientStructure(_) => "insufficient_structure",
            Error::Coverage(_) => "coverage",
            Error::Size { .. } => "size",
            Error::Comparison(_) => "comparison",
            Error::Alignment(_) => "alignment",
            Error::Config(_) => "config",
            Error::Input { .. } => "input",
            Error::Output { .. } => "output",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn insufficient(context: impl Into<String>, needed: usize, got: usize) -> Self {
        Error::InsufficientData {
            context: context.into(),
            needed,
            got,
        }
    }
}
