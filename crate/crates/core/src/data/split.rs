//! Class-based splitting and client partitioning.
//!
//! Training keeps half the inliers and zero anomalies; the remaining
//! inliers plus every anomaly form an evaluation pool that is stratified
//! into validation and test parts with matching anomaly ratios. Client
//! shards are a seeded shuffle of the training rows dealt round-robin.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::seeding::{mix, tags};

use super::encode::{encode_and_scale, EncodeStats};
use super::loader::{RawColumn, RawTable};
use super::schema::DatasetSchema;
use super::{DataError, Dataset};

/// The train / validation / test partition of one dataset.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// One inlier-only dataset per client.
#[derive(Debug, Clone)]
pub struct ClientShards {
    shards: Vec<Dataset>,
}

impl ClientShards {
    pub fn len(&self) -> usize {
        self.shards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shards.is_empty()
    }

    pub fn get(&self, i: usize) -> &Dataset {
        &self.shards[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        self.shards.iter()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(|s| s.n_samples()).collect()
    }
}

/// Row-index form of the split, computed from labels alone so encoding can
/// happen after (and be fit on) the training selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub(crate) fn split_indices(
    labels: &[u8],
    seed: u64,
    val_fraction: f64,
) -> Result<SplitIndices, DataError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DataError::Split(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut inliers: Vec<usize> = Vec::new();
    let mut anomalies: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 1 {
            anomalies.push(i);
        } else {
            inliers.push(i);
        }
    }
    if anomalies.is_empty() {
        return Err(DataError::Split("dataset has no anomalies".into()));
    }
    if inliers.len() < 4 {
        return Err(DataError::Split(format!(
            "need at least 4 inliers, found {}",
            inliers.len()
        )));
    }

    let mut rng_in = ChaCha8Rng::seed_from_u64(mix(&[seed, tags::SPLIT_INLIERS]));
    inliers.shuffle(&mut rng_in);
    let mut rng_an = ChaCha8Rng::seed_from_u64(mix(&[seed, tags::SPLIT_ANOMALIES]));
    anomalies.shuffle(&mut rng_an);

    let n_train = inliers.len() / 2;
    let train = inliers[..n_train].to_vec();
    let pool_inliers = &inliers[n_train..];

    // stratum sizes rounded to nearest, anomaly stratum first
    let n_anom_val = (val_fraction * anomalies.len() as f64).round() as usize;
    let n_inl_val = (val_fraction * pool_inliers.len() as f64).round() as usize;
    if n_anom_val == 0 {
        return Err(DataError::Split(
            "validation split would hold zero anomalies; increase val_fraction".into(),
        ));
    }
    if n_anom_val >= anomalies.len() {
        return Err(DataError::Split(
            "test split would hold zero anomalies; decrease val_fraction".into(),
        ));
    }
    if n_inl_val == 0 || n_inl_val >= pool_inliers.len() {
        return Err(DataError::Split(
            "inlier stratum would leave validation or test empty; adjust val_fraction".into(),
        ));
    }

    let mut val: Vec<usize> = pool_inliers[..n_inl_val].to_vec();
    val.extend_from_slice(&anomalies[..n_anom_val]);
    let mut test: Vec<usize> = pool_inliers[n_inl_val..].to_vec();
    test.extend_from_slice(&anomalies[n_anom_val..]);

    Ok(SplitIndices { train, val, test })
}

/// Split an encoded dataset. `val_fraction` is the share of the evaluation
/// pool (all anomalies + the inliers not used for training) that goes to
/// validation.
pub fn split(dataset: &Dataset, seed: u64, val_fraction: f64) -> Result<DataSplit, DataError> {
    let idx = split_indices(&dataset.y, seed, val_fraction)?;
    Ok(DataSplit {
        train: dataset.select(&idx.train),
        val: dataset.select(&idx.val),
        test: dataset.select(&idx.test),
        seed,
    })
}

fn select_raw(table: &RawTable, idx: &[usize]) -> RawTable {
    RawTable {
        columns: table
            .columns
            .iter()
            .map(|c| match c {
                RawColumn::Continuous(v) => {
                    RawColumn::Continuous(idx.iter().map(|&i| v[i]).collect())
                }
                RawColumn::Categorical(v) => {
                    RawColumn::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
                }
            })
            .collect(),
        labels: idx.iter().map(|&i| table.labels[i]).collect(),
        n_rows: idx.len(),
    }
}

/// Full pipeline wiring: split the raw table by labels, fit encoding stats
/// on the training rows only, then encode all three parts with those stats.
pub fn prepare(
    table: &RawTable,
    schema: &DatasetSchema,
    seed: u64,
    val_fraction: f64,
) -> Result<(DataSplit, EncodeStats), DataError> {
    let idx = split_indices(&table.labels, seed, val_fraction)?;
    let train_raw = select_raw(table, &idx.train);
    let (train, stats, _) = encode_and_scale(&train_raw, schema, None)?;
    let (val, _, _) = encode_and_scale(&select_raw(table, &idx.val), schema, Some(&stats))?;
    let (test, _, _) = encode_and_scale(&select_raw(table, &idx.test), schema, Some(&stats))?;
    Ok((
        DataSplit {
            train,
            val,
            test,
            seed,
        },
        stats,
    ))
}

/// Stratified row subsample of a raw table: keeps `fraction` of each label
/// stratum (seeded), preserving the anomaly ratio for desk-scale runs.
pub fn subsample_raw(table: &RawTable, fraction: f64, seed: u64) -> Result<RawTable, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::Split(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(table.clone());
    }
    let mut inliers: Vec<usize> = Vec::new();
    let mut anomalies: Vec<usize> = Vec::new();
    for (i, &l) in table.labels.iter().enumerate() {
        if l == 1 {
            anomalies.push(i);
        } else {
            inliers.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, tags::SUBSAMPLE]));
    inliers.shuffle(&mut rng);
    anomalies.shuffle(&mut rng);
    let keep_in = ((inliers.len() as f64 * fraction).round() as usize).max(1);
    let keep_an = ((anomalies.len() as f64 * fraction).round() as usize).max(1);
    let mut keep: Vec<usize> = inliers[..keep_in.min(inliers.len())].to_vec();
    keep.extend_from_slice(&anomalies[..keep_an.min(anomalies.len())]);
    keep.sort_unstable();
    Ok(select_raw(table, &keep))
}

/// Deal the training rows uniformly across `n_clients`: seeded shuffle,
/// then round-robin, so shard sizes differ by at most one.
pub fn partition(train: &Dataset, n_clients: usize, seed: u64) -> Result<ClientShards, DataError> {
    if n_clients == 0 {
        return Err(DataError::Partition("n_clients must be >= 1".into()));
    }
    if train.n_samples() < n_clients {
        return Err(DataError::Partition(format!(
            "cannot deal {} rows to {} clients",
            train.n_samples(),
            n_clients
        )));
    }
    let mut idx: Vec<usize> = (0..train.n_samples()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, tags::PARTITION]));
    idx.shuffle(&mut rng);
    let mut per_client: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for (pos, &row) in idx.iter().enumerate() {
        per_client[pos % n_clients].push(row);
    }
    Ok(ClientShards {
        shards: per_client.iter().map(|rows| train.select(rows)).collect(),
    })
}
