//! Dataset schema files: column names and kinds, the label column, which
//! label value marks an anomaly, and optional expected statistics used as
//! load-time validation warnings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// Expected dataset statistics; mismatches warn at load time rather than
/// fail, since published feature counts sometimes include columns that are
/// constant or dropped in circulation copies.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExpectedStats {
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub n_features: Option<usize>,
    #[serde(default)]
    pub anomaly_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub name: String,
    pub label_column: String,
    /// Label cell value that marks a sample as an anomaly; every other
    /// value is an inlier.
    pub anomaly_value: String,
    pub columns: Vec<SchemaColumn>,
    #[serde(default)]
    pub expected: Option<ExpectedStats>,
}

impl DatasetSchema {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let schema: DatasetSchema =
            serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.columns.is_empty() {
            return Err(DataError::Schema("schema has no feature columns".into()));
        }
        if self.label_column.is_empty() {
            return Err(DataError::Schema("schema has no label column".into()));
        }
        if self.columns.iter().any(|c| c.name == self.label_column) {
            return Err(DataError::Schema(format!(
                "label column '{}' also appears among the feature columns",
                self.label_column
            )));
        }
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(DataError::Schema("duplicate feature column name".into()));
        }
        Ok(())
    }

    pub fn n_continuous(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Continuous)
            .count()
    }

    pub fn n_categorical(&self) -> usize {
        self.columns.len() - self.n_continuous()
    }
}
