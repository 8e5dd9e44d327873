//! Experiment configuration: a JSON grid file expands into one
//! [`ExperimentSpec`] per (dataset x model x mode-variant x seed) cell.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tabfed_core::fed::Aggregator;
use tabfed_core::models::ModelConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub id: String,
    pub csv: PathBuf,
    pub schema: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Centralized,
    Federated,
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeKind::Centralized => "centralized",
            ModeKind::Federated => "federated",
        })
    }
}

fn default_clients() -> Vec<usize> {
    vec![3]
}

fn default_mus() -> Vec<f64> {
    vec![0.0]
}

fn default_local_epochs() -> usize {
    10
}

/// One mode entry in the config; federated entries may carry lists of
/// client counts and proximal coefficients, which the grid expands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub mode: ModeKind,
    #[serde(default = "default_clients")]
    pub clients: Vec<usize>,
    #[serde(default)]
    pub aggregator: Option<Aggregator>,
    #[serde(default = "default_mus")]
    pub mu: Vec<f64>,
    #[serde(default = "default_local_epochs")]
    pub local_epochs: usize,
    /// Communication rounds; defaults to total_epochs / local_epochs.
    /// Slow-converging setups may pin this to total_epochs instead.
    #[serde(default)]
    pub rounds: Option<usize>,
}

fn default_total_epochs() -> usize {
    200
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_val_fraction() -> f64 {
    0.5
}

/// On-disk config document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetRef>,
    pub models: Vec<ModelConfig>,
    pub modes: Vec<ModeEntry>,
    #[serde(default = "default_total_epochs")]
    pub total_epochs: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Overrides the per-dataset default (128, or 1024 for the large
    /// network-intrusion sets).
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub subsample: Option<f64>,
    pub output_dir: PathBuf,
}

/// Federated shape of one expanded cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FedSpec {
    pub n_clients: usize,
    pub aggregator: Aggregator,
    pub mu: f64,
    pub local_epochs: usize,
    pub rounds: usize,
}

/// One fully-resolved experiment: self-describing, hashable, reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetRef,
    pub model: ModelConfig,
    pub mode: ModeKind,
    pub fed: Option<FedSpec>,
    pub total_epochs: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub batch_size: usize,
    pub subsample: Option<f64>,
    pub exhaustive_threshold: bool,
}

impl ExperimentSpec {
    /// Stable identity of this cell, used for resume and file names.
    pub fn key(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    pub fn label(&self) -> String {
        let mut s = format!(
            "{}/{} {} seed={}",
            self.dataset.id, self.model.kind, self.mode, self.seed
        );
        if let Some(fed) = &self.fed {
            s.push_str(&format!(
                " clients={} {} mu={} rounds={}x{}",
                fed.n_clients, fed.aggregator, fed.mu, fed.rounds, fed.local_epochs
            ));
        }
        s
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Default batch size per dataset family: the large intrusion-detection
/// sets train at 1024, everything else at 128.
pub fn default_batch_size(dataset_id: &str) -> usize {
    let id = dataset_id.to_ascii_lowercase();
    if id.contains("kdd") {
        1024
    } else {
        128
    }
}

/// Extra knobs from the command line applied across the whole grid.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub subsample: Option<f64>,
    pub exhaustive_threshold: bool,
}

#[derive(Debug)]
pub struct ParsedConfig {
    pub specs: Vec<ExperimentSpec>,
    pub output_dir: PathBuf,
    /// Verbatim config file contents, snapshotted into the run directory.
    pub raw: String,
    pub warnings: Vec<String>,
}

/// Parse a config file and expand the grid. Empty grids are errors, not
/// silent no-ops.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ParsedConfig> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&raw)
        .with_context(|| format!("cannot parse config {}", path.display()))?;

    if cfg.datasets.is_empty() {
        bail!("config expands to an empty grid: no datasets");
    }
    if cfg.models.is_empty() {
        bail!("config expands to an empty grid: no models");
    }
    if cfg.modes.is_empty() {
        bail!("config expands to an empty grid: no modes");
    }
    if cfg.seeds.is_empty() && overrides.seed.is_none() {
        bail!("config expands to an empty grid: no seeds");
    }
    if cfg.total_epochs == 0 {
        bail!("total_epochs must be >= 1");
    }

    let seeds: Vec<u64> = match overrides.seed {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    let subsample = overrides.subsample.or(cfg.subsample);
    if let Some(f) = subsample {
        if !(f > 0.0 && f <= 1.0) {
            bail!("subsample fraction must lie in (0, 1], got {f}");
        }
    }

    let mut warnings = Vec::new();
    let mut specs = Vec::new();
    for dataset in &cfg.datasets {
        let batch_size = cfg
            .batch_size
            .unwrap_or_else(|| default_batch_size(&dataset.id));
        for model in &cfg.models {
            for mode in &cfg.modes {
                match mode.mode {
                    ModeKind::Centralized => {
                        for &seed in &seeds {
                            specs.push(ExperimentSpec {
                                dataset: dataset.clone(),
                                model: model.clone(),
                                mode: ModeKind::Centralized,
                                fed: None,
                                total_epochs: cfg.total_epochs,
                                seed,
                                val_fraction: cfg.val_fraction,
                                batch_size,
                                subsample,
                                exhaustive_threshold: overrides.exhaustive_threshold,
                            });
                        }
                    }
                    ModeKind::Federated => {
                        if mode.local_epochs == 0 {
                            bail!("local_epochs must be >= 1");
                        }
                        let rounds = mode
                            .rounds
                            .unwrap_or((cfg.total_epochs / mode.local_epochs).max(1));
                        if mode.rounds.is_none() && rounds * mode.local_epochs != cfg.total_epochs {
                            warnings.push(format!(
                                "total_epochs {} is not a multiple of local_epochs {}; federated runs use {} rounds ({} local epochs total)",
                                cfg.total_epochs,
                                mode.local_epochs,
                                rounds,
                                rounds * mode.local_epochs
                            ));
                        }
                        let aggregator = mode.aggregator.unwrap_or(Aggregator::FedAvg);
                        for &n_clients in &mode.clients {
                            for &mu in &mode.mu {
                                if aggregator == Aggregator::FedAvg && mu != 0.0 {
                                    warnings.push(format!(
                                        "mu={mu} is ignored under fedavg (clients={n_clients})"
                                    ));
                                }
                                for &seed in &seeds {
                                    specs.push(ExperimentSpec {
                                        dataset: dataset.clone(),
                                        model: model.clone(),
                                        mode: ModeKind::Federated,
                                        fed: Some(FedSpec {
                                            n_clients,
                                            aggregator,
                                            mu: if aggregator == Aggregator::FedAvg {
                                                0.0
                                            } else {
                                                mu
                                            },
                                            local_epochs: mode.local_epochs,
                                            rounds,
                                        }),
                                        total_epochs: cfg.total_epochs,
                                        seed,
                                        val_fraction: cfg.val_fraction,
                                        batch_size,
                                        subsample,
                                        exhaustive_threshold: overrides.exhaustive_threshold,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if specs.is_empty() {
        bail!("config expands to an empty grid");
    }

    Ok(ParsedConfig {
        specs,
        output_dir: overrides.out.clone().unwrap_or(cfg.output_dir),
        raw,
        warnings,
    })
}
