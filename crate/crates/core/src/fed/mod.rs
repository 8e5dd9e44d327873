//! Simulated federated training: per-round local training on client shards,
//! sample-weighted FedAvg aggregation, and the FedProx variant that anchors
//! each client's loss to the round-start global weights.
//!
//! Conventions (all deterministic given the run seed):
//! - every client participates in every round;
//! - Adam moments are client-local and reset at each round start;
//! - per-epoch batch order comes from a seed derived from
//!   (client seed, global epoch index), so a factorization of the same
//!   epoch budget replays the same schedule;
//! - aggregation sums clients in id order, making results independent of
//!   any execution interleaving.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{partition, ClientShards, DataSplit};
use crate::models::{
    build_model, init_svdd_center, train_step, ModelConfig, ModelError, ModelKind, ModelState, Prox,
};
use crate::numeric::{Matrix, NumericError, ParamVector};
use crate::seeding::{mix, tags};

#[derive(Debug, Error)]
pub enum FedError {
    #[error("federation config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("client {client} failed in round {round}, epoch {epoch}, step {step}: {source}")]
    ClientFailure {
        client: usize,
        round: usize,
        epoch: usize,
        step: usize,
        source: ModelError,
    },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    FedAvg,
    FedProx,
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregator::FedAvg => "fedavg",
            Aggregator::FedProx => "fedprox",
        })
    }
}

/// Federated run shape. `mu` is only read under [`Aggregator::FedProx`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FedConfig {
    pub n_clients: usize,
    pub local_epochs: usize,
    pub rounds: usize,
    pub aggregator: Aggregator,
    #[serde(default)]
    pub mu: f64,
    pub batch_size: usize,
    /// Explicit per-client seeds; derived from the run seed when absent.
    #[serde(default)]
    pub client_seeds: Option<Vec<u64>>,
}

impl FedConfig {
    fn validate(&self) -> Result<(), FedError> {
        if self.n_clients == 0 {
            return Err(FedError::Config("n_clients must be >= 1".into()));
        }
        if self.rounds == 0 || self.local_epochs == 0 {
            return Err(FedError::Config(
                "rounds and local_epochs must be >= 1".into(),
            ));
        }
        if self.mu < 0.0 {
            return Err(FedError::Config("mu must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(FedError::Config("batch_size must be >= 1".into()));
        }
        if let Some(seeds) = &self.client_seeds {
            if seeds.len() != self.n_clients {
                return Err(FedError::Config(format!(
                    "{} client seeds for {} clients",
                    seeds.len(),
                    self.n_clients
                )));
            }
        }
        Ok(())
    }
}

/// What happened in one communication round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Mean loss over each client's final local epoch, client id order.
    pub client_losses: Vec<f64>,
    pub global_param_norm: f64,
    /// Effective batch size per client after the small-shard fallback.
    pub batch_sizes: Vec<usize>,
    pub wall_ms: u64,
}

/// Sample-count-weighted element-wise mean of client parameter vectors.
pub fn fedavg(states: &[&ParamVector], weights: &[usize]) -> Result<ParamVector, FedError> {
    if states.is_empty() || states.len() != weights.len() {
        return Err(FedError::Config(format!(
            "{} states with {} weights",
            states.len(),
            weights.len()
        )));
    }
    let len = states[0].len();
    if states.iter().any(|s| s.len() != len) {
        return Err(FedError::Numeric(NumericError::LengthMismatch {
            expected: len,
            got: states.iter().map(|s| s.len()).find(|&l| l != len).unwrap(),
        }));
    }
    let total: usize = weights.iter().sum();
    if total == 0 {
        return Err(FedError::Config("aggregation weights sum to zero".into()));
    }
    let mut out = vec![0.0; len];
    for (state, &w) in states.iter().zip(weights) {
        let scale = w as f64 / total as f64;
        for (o, &v) in out.iter_mut().zip(state.values()) {
            *o += scale * v;
        }
    }
    Ok(ParamVector::new(out))
}

/// Batch-size fallback for small shards: a quarter of the shard, floored at
/// 8, never above the configured size, never above the shard itself.
pub fn effective_batch_size(configured: usize, shard_len: usize) -> usize {
    configured.min((shard_len / 4).max(8)).min(shard_len).max(1)
}

/// Seed for one client's epoch shuffle; depends on the *global* epoch index
/// so round boundaries do not change the schedule.
pub fn epoch_shuffle_seed(client_seed: u64, global_epoch: u64) -> u64 {
    mix(&[client_seed, tags::EPOCH, global_epoch])
}

/// Derived per-client seed when none are configured.
pub fn derive_client_seed(run_seed: u64, client: usize) -> u64 {
    mix(&[run_seed, tags::CLIENT, client as u64])
}

struct LocalRun<'a> {
    data: &'a Matrix,
    epochs: usize,
    epoch_offset: u64,
    batch_size: usize,
    client_seed: u64,
    prox: Option<Prox<'a>>,
}

/// Mini-batch training of one model over one data shard. Returns the mean
/// loss of the final epoch. Failures carry the (epoch, step) position.
fn train_local(
    state: &mut ModelState,
    run: LocalRun<'_>,
) -> Result<f64, (usize, usize, ModelError)> {
    let n = run.data.rows();
    let mut last_epoch_loss = 0.0;
    for epoch in 0..run.epochs {
        let seed = epoch_shuffle_seed(run.client_seed, run.epoch_offset + epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut sum = 0.0;
        let mut batches = 0usize;
        for (step, chunk) in order.chunks(run.batch_size).enumerate() {
            let batch = run.data.select_rows(chunk);
            let loss = train_step(state, &batch, run.prox).map_err(|e| (epoch, step, e))?;
            sum += loss;
            batches += 1;
        }
        last_epoch_loss = sum / batches as f64;
    }
    Ok(last_epoch_loss)
}

/// One communication round: broadcast the global model, train every client
/// locally (FedProx anchored at the round-start weights when configured),
/// aggregate by shard size.
pub fn run_round(
    global: &ModelState,
    shards: &ClientShards,
    cfg: &FedConfig,
    round: usize,
    client_seeds: &[u64],
) -> Result<(ModelState, RoundLog), FedError> {
    cfg.validate()?;
    if shards.len() != cfg.n_clients {
        return Err(FedError::Config(format!(
            "{} shards for {} clients",
            shards.len(),
            cfg.n_clients
        )));
    }
    let started = Instant::now();
    let round_start_params = global.params().clone();
    let mut locals: Vec<ModelState> = Vec::with_capacity(cfg.n_clients);
    let mut losses = Vec::with_capacity(cfg.n_clients);
    let mut batch_sizes = Vec::with_capacity(cfg.n_clients);

    for client in 0..cfg.n_clients {
        let shard = shards.get(client);
        let mut local = global.clone();
        local.reset_optimizer();
        let prox = match cfg.aggregator {
            Aggregator::FedProx => Some(Prox {
                mu: cfg.mu,
                global: &round_start_params,
            }),
            Aggregator::FedAvg => None,
        };
        let batch_size = effective_batch_size(cfg.batch_size, shard.n_samples());
        batch_sizes.push(batch_size);
        let loss = train_local(
            &mut local,
            LocalRun {
                data: &shard.x,
                epochs: cfg.local_epochs,
                epoch_offset: (round * cfg.local_epochs) as u64,
                batch_size,
                client_seed: client_seeds[client],
                prox,
            },
        )
        .map_err(|(epoch, step, source)| FedError::ClientFailure {
            client,
            round,
            epoch,
            step,
            source,
        })?;
        losses.push(loss);
        locals.push(local);
    }

    let params: Vec<&ParamVector> = locals.iter().map(|l| l.params()).collect();
    let weights: Vec<usize> = shards.sizes();
    let aggregated = fedavg(&params, &weights)?;
    let norm = aggregated.l2_norm();
    let mut new_global = global.clone();
    new_global.set_params(aggregated)?;
    new_global.reset_optimizer();

    Ok((
        new_global,
        RoundLog {
            round,
            client_losses: losses,
            global_param_norm: norm,
            batch_sizes,
            wall_ms: started.elapsed().as_millis() as u64,
        },
    ))
}

/// Full federated run: build the global model, fix the DeepSVDD center from
/// the complete training set, partition, then iterate rounds. `on_round`
/// observes each completed round (for streaming logs).
pub fn run_training_observed(
    model_cfg: &ModelConfig,
    data: &DataSplit,
    cfg: &FedConfig,
    seed: u64,
    mut on_round: impl FnMut(&RoundLog),
) -> Result<(ModelState, Vec<RoundLog>), FedError> {
    cfg.validate()?;
    let mut global = build_model(
        model_cfg,
        data.train.x.cols(),
        mix(&[seed, tags::MODEL_INIT]),
    )?;
    if global.kind() == ModelKind::DeepSvdd {
        init_svdd_center(&mut global, &data.train.x)?;
    }
    let shards = partition(&data.train, cfg.n_clients, seed)?;
    let client_seeds: Vec<u64> = match &cfg.client_seeds {
        Some(seeds) => seeds.clone(),
        None => (0..cfg.n_clients)
            .map(|c| derive_client_seed(seed, c))
            .collect(),
    };
    let mut logs = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let (next, log) = run_round(&global, &shards, cfg, round, &client_seeds)?;
        global = next;
        on_round(&log);
        logs.push(log);
    }
    Ok((global, logs))
}

pub fn run_training(
    model_cfg: &ModelConfig,
    data: &DataSplit,
    cfg: &FedConfig,
    seed: u64,
) -> Result<(ModelState, Vec<RoundLog>), FedError> {
    run_training_observed(model_cfg, data, cfg, seed, |_| {})
}

/// Centralized training: the one-worker degenerate path. It shares the
/// partition / seed-derivation / local-loop machinery with the federated
/// path, so a single-client federated run with rounds = 1 and
/// local_epochs = `epochs` reproduces it bit-for-bit.
pub fn train_centralized(
    model_cfg: &ModelConfig,
    data: &DataSplit,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(ModelState, Vec<RoundLog>), FedError> {
    if epochs == 0 || batch_size == 0 {
        return Err(FedError::Config(
            "epochs and batch_size must be >= 1".into(),
        ));
    }
    let started = Instant::now();
    let mut model = build_model(
        model_cfg,
        data.train.x.cols(),
        mix(&[seed, tags::MODEL_INIT]),
    )?;
    if model.kind() == ModelKind::DeepSvdd {
        init_svdd_center(&mut model, &data.train.x)?;
    }
    let shards = partition(&data.train, 1, seed)?;
    let shard = shards.get(0);
    let batch_size = batch_size.min(shard.n_samples()).max(1);
    let loss = train_local(
        &mut model,
        LocalRun {
            data: &shard.x,
            epochs,
            epoch_offset: 0,
            batch_size,
            client_seed: derive_client_seed(seed, 0),
            prox: None,
        },
    )
    .map_err(|(epoch, step, source)| FedError::ClientFailure {
        client: 0,
        round: 0,
        epoch,
        step,
        source,
    })?;
    let norm = model.params().l2_norm();
    let log = RoundLog {
        round: 0,
        client_losses: vec![loss],
        global_param_norm: norm,
        batch_sizes: vec![batch_size],
        wall_ms: started.elapsed().as_millis() as u64,
    };
    Ok((model, vec![log]))
}

#[cfg(test)]
mod tests;
