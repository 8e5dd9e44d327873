//! Core library for benchmarking unsupervised anomaly detectors on tabular
//! data, both centralized and under simulated federated training.
//!
//! The crate is organized around five subsystems:
//!
//! - [`numeric`] — dense matrices, MLP forward/backward, Adam.
//! - [`models`] — the five deep detectors behind a uniform build / train-step /
//!   score contract.
//! - [`data`] — CSV ingestion, one-hot + min-max encoding, class-based
//!   train/val/test splitting and uniform client partitioning.
//! - [`fed`] — round orchestration with FedAvg / FedProx aggregation.
//! - [`eval`] — threshold-free and thresholded metrics plus optimal-threshold
//!   estimation on the validation split.
//!
//! Everything is deterministic given the seeds in play; sub-seeds are derived
//! through [`seeding`].

// index loops mirror the matrix math they implement
#![allow(clippy::needless_range_loop)]

pub mod data;
pub mod eval;
pub mod fed;
pub mod models;
pub mod numeric;
pub mod seeding;

pub use data::{ClientShards, DataSplit, Dataset, DatasetSchema};
pub use eval::{evaluate, LabeledScores, MetricsReport};
pub use fed::{fedavg, run_training, train_centralized, Aggregator, FedConfig, RoundLog};
pub use models::{
    anomaly_scores, build_model, init_svdd_center, train_step, ModelConfig, ModelKind, ModelState,
    Prox, ScoreVector,
};
pub use numeric::{l2_distance_sq, AdamState, Matrix, MlpSpec, ParamVector};
