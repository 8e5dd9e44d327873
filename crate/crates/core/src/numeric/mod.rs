//! Dense-matrix substrate: 64-bit matrices, multilayer-perceptron
//! forward/backward passes, and an Adam optimizer with decoupled weight
//! decay. This is the fixed computation pattern every detector in
//! [`crate::models`] is built from — no general autodiff, no convolutions.

mod adam;
mod matrix;
mod mlp;
mod param;

pub use adam::{adam_step, AdamState};
pub use matrix::Matrix;
pub(crate) use mlp::stable_sigmoid;
pub use mlp::{backward, forward, forward_cached, Activation, ForwardCache, MlpSpec};
pub use param::{l2_distance_sq, ParamVector};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cache does not match this forward configuration: {0}")]
    StaleCache(String),
}
