//! Feature encoding: categoricals one-hot against a fit-pass vocabulary,
//! continuous features min-max scaled with fit-pass bounds. Stats must be
//! fit on training rows only; the apply pass never refits.

use super::loader::{RawColumn, RawTable};
use super::schema::{ColumnKind, DatasetSchema};
use super::{DataError, Dataset};
use crate::numeric::Matrix;

/// Per-column statistics from a fit pass.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnStats {
    /// min / max over the fit rows.
    Continuous { min: f64, max: f64 },
    /// Sorted category vocabulary from the fit rows.
    Categorical { vocab: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeStats {
    pub columns: Vec<ColumnStats>,
}

impl EncodeStats {
    /// Width of the encoded feature space under these stats.
    pub fn encoded_width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnStats::Continuous { .. } => 1,
                ColumnStats::Categorical { vocab } => vocab.len(),
            })
            .sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct EncodeReport {
    /// Categorical cells whose category was absent from the fit vocabulary
    /// (encoded as all-zeros).
    pub unseen_categories: usize,
    /// Continuous cells scaled outside [0, 1].
    pub out_of_range: usize,
}

fn fit(table: &RawTable, schema: &DatasetSchema) -> EncodeStats {
    let columns = table
        .columns
        .iter()
        .zip(&schema.columns)
        .map(|(col, sc)| match (col, sc.kind) {
            (RawColumn::Continuous(values), ColumnKind::Continuous) => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for &v in values {
                    min = min.min(v);
                    max = max.max(v);
                }
                ColumnStats::Continuous { min, max }
            }
            (RawColumn::Categorical(values), ColumnKind::Categorical) => {
                let mut vocab: Vec<String> = values.clone();
                vocab.sort_unstable();
                vocab.dedup();
                ColumnStats::Categorical { vocab }
            }
            _ => unreachable!("loader builds columns in schema order"),
        })
        .collect();
    EncodeStats { columns }
}

/// Encode a raw table. With `fit_stats` absent the stats are fit from this
/// table (training data only, by pipeline contract); otherwise the given
/// stats are applied unchanged.
pub fn encode_and_scale(
    table: &RawTable,
    schema: &DatasetSchema,
    fit_stats: Option<&EncodeStats>,
) -> Result<(Dataset, EncodeStats, EncodeReport), DataError> {
    if table.columns.len() != schema.columns.len() {
        return Err(DataError::Schema(format!(
            "table has {} columns, schema {}",
            table.columns.len(),
            schema.columns.len()
        )));
    }
    let stats = match fit_stats {
        Some(s) => s.clone(),
        None => fit(table, schema),
    };
    if stats.columns.len() != table.columns.len() {
        return Err(DataError::Schema(
            "encode stats do not match the schema".into(),
        ));
    }

    let n = table.n_rows;
    let width = stats.encoded_width();
    let mut data = vec![0.0; n * width];
    let mut report = EncodeReport::default();

    let mut offset = 0;
    for (col, st) in table.columns.iter().zip(&stats.columns) {
        match (col, st) {
            (RawColumn::Continuous(values), ColumnStats::Continuous { min, max }) => {
                let range = max - min;
                for (r, &v) in values.iter().enumerate() {
                    let scaled = if range == 0.0 {
                        0.0 // constant column under the fit pass
                    } else {
                        (v - min) / range
                    };
                    if !(0.0..=1.0).contains(&scaled) {
                        report.out_of_range += 1;
                    }
                    data[r * width + offset] = scaled;
                }
                offset += 1;
            }
            (RawColumn::Categorical(values), ColumnStats::Categorical { vocab }) => {
                for (r, v) in values.iter().enumerate() {
                    match vocab.binary_search(v) {
                        Ok(slot) => data[r * width + offset + slot] = 1.0,
                        Err(_) => report.unseen_categories += 1, // all-zeros row block
                    }
                }
                offset += vocab.len();
            }
            _ => {
                return Err(DataError::Schema(
                    "encode stats kind does not match the column kind".into(),
                ))
            }
        }
    }

    let dataset = Dataset::new(
        Matrix::from_vec(n, width, data)?,
        table.labels.clone(),
        schema.columns.len(),
    )?;
    Ok((dataset, stats, report))
}
