use std::path::PathBuf;

use thiserror::Error;

use crate::ingest::ClassLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected 42 or 43 comma-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },

    #[error("line {line}: field {field} is not a finite number: {value:?}")]
    NumericParse {
        line: usize,
        field: usize,
        value: String,
    },

    #[error("line {line}: unknown attack name {name:?}")]
    UnknownAttack { line: usize, name: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("class {0} has no records; cannot oversample")]
    MissingClass(ClassLabel),

    #[error("bad network topology: {0}")]
    BadTopology(String),

    #[error("bad training configuration: {0}")]
    BadConfig(String),

    #[error("all points are identical; bandwidth is undefined")]
    DegenerateData,

    #[error("no data point lies within the neighborhood radius")]
    EmptyNeighborhood,

    #[error("binary SVM training needs both +1 and -1 labels")]
    SingleClass,

    #[error("length mismatch: {left} predictions vs {right} ground truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("nothing to evaluate")]
    Empty,

    #[error("invalid fold count k={k} for n={n} records")]
    BadK { k: usize, n: usize },

    #[error("unsupported model format version {found} (supported: {supported})")]
    FormatVersion { found: u32, supported: u32 },

    #[error("model container is corrupt or truncated: {0}")]
    Checksum(String),

    #[error("model payload could not be decoded: {0}")]
    Decode(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("unknown config key {0:?}")]
    UnknownKey(String),

    #[error("config value out of range: {key} = {value} ({reason})")]
    Range {
        key: String,
        value: String,
        reason: String,
    },

    #[error("cluster has {records} records over {classes} classes; too small for {folds}-fold selection")]
    TinyCluster {
        records: usize,
        classes: usize,
        folds: usize,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arity(expected: usize, found: usize) -> Self {
        Error::ArityMismatch { expected, found }
    }

    /// Strips `Stage` / `Fold` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Fold { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self.root(),
            Error::ConfigParse(_)
                | Error::UnknownKey(_)
                | Error::Range { .. }
                | Error::BadConfig(_)
                | Error::BadTopology(_)
        )
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
