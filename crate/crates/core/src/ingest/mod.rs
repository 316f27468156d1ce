//! On-disk formats: the quote CSV, versioned model files and per-round
//! training logs.

mod csv_io;
mod metrics;
mod model_io;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use csv_io::{csv_header, read_csv, write_csv, CsvLoad, MAX_MALFORMED_FRACTION};
pub use metrics::{write_epoch_metrics, write_round_metrics};
pub use model_io::{
    decode_model, encode_model, load_model, load_network, load_trees, save_model, LoadedModel, Model,
    ModelError, ModelManifest, FORMAT_VERSION, NETWORK_MAGIC, TREES_MAGIC,
};

/// A data row that could not be parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: schema mismatch: {reason}", path.display())]
    Schema { path: PathBuf, reason: String },
    #[error("{}: {rejected} of {total} rows malformed, first at {first}", path.display())]
    TooManyMalformed {
        path: PathBuf,
        rejected: usize,
        total: usize,
        first: RowError,
    },
    #[error("{}: incompatible model file: {reason}", path.display())]
    IncompatibleModel { path: PathBuf, reason: String },
}

impl IngestError {
    fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }

    fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        IngestError::Csv {
            path: path.into(),
            source,
        }
    }
}
