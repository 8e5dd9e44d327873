//! Schema-driven CSV ingestion. UTF-8, header row, one label column; empty
//! cells are errors, extra columns are ignored with a warning.

use std::path::Path;

use super::schema::{ColumnKind, DatasetSchema};
use super::DataError;

/// One typed feature column in schema order.
#[derive(Debug, Clone)]
pub enum RawColumn {
    Continuous(Vec<f64>),
    Categorical(Vec<String>),
}

/// Typed columns plus binary anomaly labels, still unencoded.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub labels: Vec<u8>,
    pub n_rows: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub n_rows: usize,
    pub n_anomalies: usize,
    pub warnings: Vec<String>,
}

/// Load and type a CSV file against `schema`.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<(RawTable, LoadReport), DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    let header_index = |name: &str| headers.iter().position(|h| h.trim() == name);

    let mut feature_idx = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        feature_idx.push(
            header_index(&col.name).ok_or_else(|| DataError::MissingColumn(col.name.clone()))?,
        );
    }
    let label_idx = header_index(&schema.label_column)
        .ok_or_else(|| DataError::MissingColumn(schema.label_column.clone()))?;

    let mut warnings = Vec::new();
    let known = schema.columns.len() + 1;
    if headers.len() > known {
        warnings.push(format!(
            "csv has {} columns, schema names {known}; extras are ignored",
            headers.len()
        ));
    }

    let mut columns: Vec<RawColumn> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Continuous => RawColumn::Continuous(Vec::new()),
            ColumnKind::Categorical => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    let mut labels = Vec::new();

    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(format!("row {row_no}: {e}")))?;
        for (slot, (&idx, col_schema)) in feature_idx.iter().zip(&schema.columns).enumerate() {
            let cell = record.get(idx).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(DataError::BadCell {
                    row: row_no,
                    column: col_schema.name.clone(),
                    reason: "empty cell".into(),
                });
            }
            match &mut columns[slot] {
                RawColumn::Continuous(values) => {
                    let v: f64 = cell.parse().map_err(|e| DataError::BadCell {
                        row: row_no,
                        column: col_schema.name.clone(),
                        reason: format!("{e}"),
                    })?;
                    if !v.is_finite() {
                        return Err(DataError::BadCell {
                            row: row_no,
                            column: col_schema.name.clone(),
                            reason: "non-finite value".into(),
                        });
                    }
                    values.push(v);
                }
                RawColumn::Categorical(values) => values.push(cell.to_string()),
            }
        }
        let label_cell = record.get(label_idx).unwrap_or("").trim();
        if label_cell.is_empty() {
            return Err(DataError::BadCell {
                row: row_no,
                column: schema.label_column.clone(),
                reason: "empty cell".into(),
            });
        }
        labels.push(u8::from(label_cell == schema.anomaly_value));
    }

    let n_rows = labels.len();
    if n_rows == 0 {
        return Err(DataError::EmptyFile);
    }
    let n_anomalies = labels.iter().filter(|&&l| l == 1).count();

    if let Some(expected) = &schema.expected {
        if let Some(n) = expected.n_samples {
            if n != n_rows {
                warnings.push(format!("expected {n} samples, file has {n_rows}"));
            }
        }
        if let Some(f) = expected.n_features {
            if f != schema.columns.len() {
                warnings.push(format!(
                    "schema lists {} features, expected statistics say {f}",
                    schema.columns.len()
                ));
            }
        }
        if let Some(r) = expected.anomaly_ratio {
            let actual = n_anomalies as f64 / n_rows as f64;
            if (actual - r).abs() > 0.001 {
                warnings.push(format!(
                    "anomaly ratio {actual:.4} differs from expected {r:.4}"
                ));
            }
        }
    }

    Ok((
        RawTable {
            columns,
            labels,
            n_rows,
        },
        LoadReport {
            n_rows,
            n_anomalies,
            warnings,
        },
    ))
}
