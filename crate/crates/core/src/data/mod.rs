//! Tabular data pipeline: schema-driven CSV ingestion, one-hot + min-max
//! encoding, the class-based train/val/test split (anomaly-free training
//! set, all anomalies in the evaluation pool), and uniform client
//! partitioning.

mod encode;
mod loader;
mod schema;
mod split;
pub mod synthetic;

pub use encode::{encode_and_scale, EncodeReport, EncodeStats};
pub use loader::{load_csv, LoadReport, RawColumn, RawTable};
pub use schema::{ColumnKind, DatasetSchema, ExpectedStats, SchemaColumn};
pub use split::{partition, prepare, split, subsample_raw, ClientShards, DataSplit};

use thiserror::Error;

use crate::numeric::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("column '{0}' is missing from the csv header")]
    MissingColumn(String),
    #[error("cannot parse cell at row {row}, column '{column}': {reason}")]
    BadCell {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("csv file is empty (no data rows)")]
    EmptyFile,
    #[error("csv error: {0}")]
    Csv(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error(transparent)]
    Numeric(#[from] crate::numeric::NumericError),
}

/// An encoded dataset: feature matrix plus binary anomaly labels
/// (1 = anomaly).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub n_features_raw: usize,
    pub n_features_encoded: usize,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<u8>, n_features_raw: usize) -> Result<Self, DataError> {
        if x.rows() != y.len() {
            return Err(DataError::Schema(format!(
                "matrix has {} rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        let n_features_encoded = x.cols();
        Ok(Self {
            x,
            y,
            n_features_raw,
            n_features_encoded,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn anomaly_count(&self) -> usize {
        self.y.iter().filter(|&&l| l == 1).count()
    }

    pub fn anomaly_ratio(&self) -> f64 {
        if self.y.is_empty() {
            0.0
        } else {
            self.anomaly_count() as f64 / self.y.len() as f64
        }
    }

    /// Row subset in the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            n_features_raw: self.n_features_raw,
            n_features_encoded: self.n_features_encoded,
        }
    }
}
