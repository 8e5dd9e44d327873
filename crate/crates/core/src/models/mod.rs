//! The five anomaly detectors behind one uniform contract: build a model,
//! run one local training step (optionally FedProx-regularized), and score
//! a batch per sample (higher score = more anomalous).

mod checkpoint;
mod dae;
mod dsebm;
mod memae;
mod neutralad;
mod svdd;

pub use checkpoint::{load_model, save_model};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{
    adam_step, l2_distance_sq, AdamState, Matrix, MlpSpec, NumericError, ParamVector,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("deep svdd center is not initialized; call init_svdd_center before training/scoring")]
    CenterUnset,
    #[error("non-finite anomaly score at sample {sample}")]
    NonFiniteScore { sample: usize },
    #[error("non-finite training loss")]
    NonFiniteLoss,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Which detector a [`ModelState`] is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dae,
    Dsebm,
    DeepSvdd,
    NeuTraLad,
    MemAe,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Dae,
        ModelKind::Dsebm,
        ModelKind::DeepSvdd,
        ModelKind::NeuTraLad,
        ModelKind::MemAe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dae => "dae",
            ModelKind::Dsebm => "dsebm",
            ModelKind::DeepSvdd => "deepsvdd",
            ModelKind::NeuTraLad => "neutralad",
            ModelKind::MemAe => "memae",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How NeuTraLAD applies a learned transformation to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// x + T(x)
    Residual,
    /// x ⊙ sigmoid(T(x))
    Multiplicative,
}

fn d_latent() -> usize {
    2
}
fn d_memory() -> usize {
    50
}
fn d_svdd_out() -> usize {
    32
}
fn d_trans_kind() -> TransformKind {
    TransformKind::Residual
}
fn d_num_trans() -> usize {
    11
}
fn d_temperature() -> f64 {
    0.1
}
fn d_shrink() -> f64 {
    0.0025
}
fn d_entropy() -> f64 {
    0.0002
}

/// Model hyperparameters. Fields irrelevant to `kind` are ignored at build
/// time but still validated when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "d_latent")]
    pub latent_dim: usize,
    #[serde(default = "d_memory")]
    pub memae_memory_dim: usize,
    #[serde(default = "d_svdd_out")]
    pub svdd_output_features: usize,
    #[serde(default = "d_trans_kind")]
    pub neutralad_trans_kind: TransformKind,
    #[serde(default = "d_num_trans")]
    pub neutralad_num_transforms: usize,
    #[serde(default = "d_temperature")]
    pub neutralad_temperature: f64,
    #[serde(default = "d_shrink")]
    pub memae_shrink_threshold: f64,
    #[serde(default = "d_entropy")]
    pub memae_entropy_weight: f64,
    /// Score DSEBM by reconstruction error instead of energy.
    #[serde(default)]
    pub dsebm_score_reconstruction: bool,
    /// Explicit hidden widths for the encoder (input and latent excluded),
    /// overriding the default halving rule.
    #[serde(default)]
    pub encoder_widths: Option<Vec<usize>>,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            latent_dim: d_latent(),
            memae_memory_dim: d_memory(),
            svdd_output_features: d_svdd_out(),
            neutralad_trans_kind: d_trans_kind(),
            neutralad_num_transforms: d_num_trans(),
            neutralad_temperature: d_temperature(),
            memae_shrink_threshold: d_shrink(),
            memae_entropy_weight: d_entropy(),
            dsebm_score_reconstruction: false,
            encoder_widths: None,
        }
    }

    pub fn with_latent(mut self, latent_dim: usize) -> Self {
        self.latent_dim = latent_dim;
        self
    }

    fn validate(&self, input_dim: usize) -> Result<(), ModelError> {
        if input_dim < 1 {
            return Err(ModelError::Config("input_dim must be >= 1".into()));
        }
        if self.latent_dim < 1 {
            return Err(ModelError::Config("latent_dim must be >= 1".into()));
        }
        if self.memae_memory_dim < 1 {
            return Err(ModelError::Config("memae_memory_dim must be >= 1".into()));
        }
        if self.svdd_output_features < 1 {
            return Err(ModelError::Config(
                "svdd_output_features must be >= 1".into(),
            ));
        }
        if self.neutralad_num_transforms < 2 {
            return Err(ModelError::Config(
                "neutralad_num_transforms must be >= 2 (the contrastive loss needs negatives)"
                    .into(),
            ));
        }
        if !self.neutralad_temperature.is_finite() || self.neutralad_temperature <= 0.0 {
            return Err(ModelError::Config(
                "neutralad_temperature must be > 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.memae_shrink_threshold) {
            return Err(ModelError::Config(
                "memae_shrink_threshold must lie in [0, 1)".into(),
            ));
        }
        if self.memae_entropy_weight < 0.0 {
            return Err(ModelError::Config(
                "memae_entropy_weight must be >= 0".into(),
            ));
        }
        if let Some(widths) = &self.encoder_widths {
            if widths.contains(&0) {
                return Err(ModelError::Config("encoder_widths contain zero".into()));
            }
        }
        // compression is required only where the latent must reconstruct
        if matches!(self.kind, ModelKind::Dae | ModelKind::MemAe) && self.latent_dim >= input_dim {
            return Err(ModelError::Config(format!(
                "latent_dim {} >= input_dim {}: autoencoder would not compress",
                self.latent_dim, input_dim
            )));
        }
        Ok(())
    }
}

/// Encoder widths: repeated halving `in -> in/2 -> in/4 -> target`, keeping
/// only hidden widths strictly greater than the target, at most two hidden
/// layers.
pub(crate) fn encoder_widths(
    input_dim: usize,
    target_dim: usize,
    explicit: &Option<Vec<usize>>,
) -> Vec<usize> {
    let mut widths = vec![input_dim];
    match explicit {
        Some(hidden) => widths.extend_from_slice(hidden),
        None => {
            for h in [input_dim / 2, input_dim / 4] {
                if h > target_dim {
                    widths.push(h);
                }
            }
        }
    }
    widths.push(target_dim);
    widths
}

/// Architecture details resolved from (config, input_dim).
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Arch {
    Dae {
        encoder: MlpSpec,
        decoder: MlpSpec,
    },
    MemAe {
        encoder: MlpSpec,
        decoder: MlpSpec,
        memory_dim: usize,
        latent: usize,
    },
    DeepSvdd {
        net: MlpSpec,
    },
    Dsebm {
        input_dim: usize,
        hidden: usize,
    },
    NeuTraLad {
        encoder: MlpSpec,
        transform: MlpSpec,
        num_transforms: usize,
    },
}

impl Arch {
    fn param_len(&self) -> usize {
        match self {
            Arch::Dae { encoder, decoder } => encoder.param_len() + decoder.param_len(),
            Arch::MemAe {
                encoder,
                decoder,
                memory_dim,
                latent,
            } => encoder.param_len() + decoder.param_len() + memory_dim * latent,
            Arch::DeepSvdd { net } => net.param_len(),
            Arch::Dsebm { input_dim, hidden } => input_dim * hidden + hidden + input_dim,
            Arch::NeuTraLad {
                encoder,
                transform,
                num_transforms,
            } => encoder.param_len() + num_transforms * transform.param_len(),
        }
    }

    /// Human-readable layout descriptor; checkpoints checksum it.
    pub(crate) fn descriptor(&self) -> String {
        fn widths(s: &MlpSpec) -> String {
            s.widths()
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        match self {
            Arch::Dae { encoder, decoder } => {
                format!("dae enc[{}] dec[{}]", widths(encoder), widths(decoder))
            }
            Arch::MemAe {
                encoder,
                decoder,
                memory_dim,
                latent,
            } => format!(
                "memae enc[{}] dec[{}] mem[{}x{}]",
                widths(encoder),
                widths(decoder),
                memory_dim,
                latent
            ),
            Arch::DeepSvdd { net } => format!("deepsvdd net[{}]", widths(net)),
            Arch::Dsebm { input_dim, hidden } => format!("dsebm w[{input_dim}x{hidden}]"),
            Arch::NeuTraLad {
                encoder,
                transform,
                num_transforms,
            } => format!(
                "neutralad enc[{}] trans[{}]x{}",
                widths(encoder),
                widths(transform),
                num_transforms
            ),
        }
    }
}

/// Per-sample anomaly scores for one batch; higher = more anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Self {
        Self(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A built detector: architecture, flat trainable parameters, the fixed
/// DeepSVDD center when applicable, and the optimizer state.
#[derive(Debug, Clone)]
pub struct ModelState {
    config: ModelConfig,
    input_dim: usize,
    arch: Arch,
    params: ParamVector,
    center: Option<Vec<f64>>,
    optimizer: AdamState,
}

impl ModelState {
    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    /// Replace the trainable parameters (used by aggregation); the layout
    /// must match.
    pub fn set_params(&mut self, params: ParamVector) -> Result<(), ModelError> {
        if params.len() != self.params.len() {
            return Err(ModelError::Numeric(NumericError::LengthMismatch {
                expected: self.params.len(),
                got: params.len(),
            }));
        }
        self.params = params;
        Ok(())
    }

    pub fn center(&self) -> Option<&[f64]> {
        self.center.as_deref()
    }

    pub(crate) fn set_center(&mut self, center: Vec<f64>) {
        self.center = Some(center);
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.optimizer
    }

    pub fn optimizer_mut(&mut self) -> &mut AdamState {
        &mut self.optimizer
    }

    /// Zero the Adam moments and step counter (round-start convention).
    pub fn reset_optimizer(&mut self) {
        self.optimizer.reset();
    }

    #[cfg(test)]
    pub(crate) fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn layout_descriptor(&self) -> String {
        self.arch.descriptor()
    }
}

/// FedProx regularization for one training step: pulls the local weights
/// toward `global` with strength `mu`.
#[derive(Debug, Clone, Copy)]
pub struct Prox<'a> {
    pub mu: f64,
    pub global: &'a ParamVector,
}

/// Deterministically build a model for `input_dim`-wide data.
///
/// The DeepSVDD center starts unset; call [`init_svdd_center`] before
/// training or scoring that kind.
pub fn build_model(
    config: &ModelConfig,
    input_dim: usize,
    seed: u64,
) -> Result<ModelState, ModelError> {
    config.validate(input_dim)?;
    let arch = match config.kind {
        ModelKind::Dae => dae::build_arch(config, input_dim)?,
        ModelKind::MemAe => memae::build_arch(config, input_dim)?,
        ModelKind::DeepSvdd => svdd::build_arch(config, input_dim)?,
        ModelKind::Dsebm => dsebm::build_arch(config, input_dim)?,
        ModelKind::NeuTraLad => neutralad::build_arch(config, input_dim)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = match &arch {
        Arch::Dae { encoder, decoder } => {
            let mut p = encoder.init_params(&mut rng);
            p.extend(decoder.init_params(&mut rng));
            p
        }
        Arch::MemAe {
            encoder,
            decoder,
            memory_dim,
            latent,
        } => {
            let mut p = encoder.init_params(&mut rng);
            p.extend(decoder.init_params(&mut rng));
            p.extend(memae::init_memory(*memory_dim, *latent, &mut rng));
            p
        }
        Arch::DeepSvdd { net } => net.init_params(&mut rng),
        Arch::Dsebm { input_dim, hidden } => dsebm::init_params(*input_dim, *hidden, &mut rng),
        Arch::NeuTraLad {
            encoder,
            transform,
            num_transforms,
        } => {
            let mut p = encoder.init_params(&mut rng);
            for _ in 0..*num_transforms {
                p.extend(transform.init_params(&mut rng));
            }
            p
        }
    };
    let len = params.len();
    debug_assert_eq!(len, arch.param_len());
    Ok(ModelState {
        config: config.clone(),
        input_dim,
        arch,
        params: ParamVector::new(params),
        center: None,
        optimizer: AdamState::new(len, 1e-4, 1e-4),
    })
}

/// One gradient step on the model objective over `batch` (inliers only, by
/// caller contract), plus the exact proximal gradient `mu*(w - w_t)` when
/// `prox` is given. Returns the reported loss
/// `L_obj + (mu/2)*||w - w_t||^2`.
pub fn train_step(
    state: &mut ModelState,
    batch: &Matrix,
    prox: Option<Prox<'_>>,
) -> Result<f64, ModelError> {
    if batch.cols() != state.input_dim {
        return Err(ModelError::Numeric(NumericError::DimensionMismatch(
            format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                state.input_dim
            ),
        )));
    }
    if batch.rows() == 0 {
        return Err(ModelError::Config("empty training batch".into()));
    }
    let (l_obj, mut grads) = loss_and_grad(state, batch)?;
    if !l_obj.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    let mut loss = l_obj;
    if let Some(p) = prox {
        if p.global.len() != state.params.len() {
            return Err(ModelError::Numeric(NumericError::LengthMismatch {
                expected: state.params.len(),
                got: p.global.len(),
            }));
        }
        if p.mu != 0.0 {
            for ((g, w), wt) in grads
                .iter_mut()
                .zip(state.params.values())
                .zip(p.global.values())
            {
                *g += p.mu * (w - wt);
            }
            loss += 0.5 * p.mu * l2_distance_sq(&state.params, p.global)?;
        }
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(ModelError::Numeric(NumericError::NonFinite(
            "gradient".into(),
        )));
    }
    adam_step(state.params.values_mut(), &grads, &mut state.optimizer)?;
    if state.params.values().iter().any(|p| !p.is_finite()) {
        return Err(ModelError::Numeric(NumericError::NonFinite(
            "parameters after update".into(),
        )));
    }
    Ok(loss)
}

/// Model objective and its gradient with respect to the flat parameter
/// vector, without touching the optimizer. Useful for gradient audits.
pub fn loss_and_gradient(
    state: &ModelState,
    batch: &Matrix,
) -> Result<(f64, Vec<f64>), ModelError> {
    if batch.cols() != state.input_dim {
        return Err(ModelError::Numeric(NumericError::DimensionMismatch(
            format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                state.input_dim
            ),
        )));
    }
    loss_and_grad(state, batch)
}

fn loss_and_grad(state: &ModelState, batch: &Matrix) -> Result<(f64, Vec<f64>), ModelError> {
    let params = state.params.values();
    match &state.arch {
        Arch::Dae { encoder, decoder } => dae::loss_and_grad(encoder, decoder, params, batch),
        Arch::MemAe {
            encoder,
            decoder,
            memory_dim,
            latent,
        } => memae::loss_and_grad(
            encoder,
            decoder,
            *memory_dim,
            *latent,
            params,
            batch,
            state.config.memae_shrink_threshold,
            state.config.memae_entropy_weight,
        ),
        Arch::DeepSvdd { net } => {
            let center = state.center.as_deref().ok_or(ModelError::CenterUnset)?;
            svdd::loss_and_grad(net, params, batch, center)
        }
        Arch::Dsebm { input_dim, hidden } => {
            dsebm::loss_and_grad(*input_dim, *hidden, params, batch)
        }
        Arch::NeuTraLad {
            encoder,
            transform,
            num_transforms,
        } => neutralad::loss_and_grad(
            encoder,
            transform,
            *num_transforms,
            params,
            batch,
            state.config.neutralad_trans_kind,
            state.config.neutralad_temperature,
        ),
    }
}

/// Per-sample anomaly scores, all finite, higher = more anomalous.
pub fn anomaly_scores(state: &ModelState, batch: &Matrix) -> Result<ScoreVector, ModelError> {
    if batch.cols() != state.input_dim {
        return Err(ModelError::Numeric(NumericError::DimensionMismatch(
            format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                state.input_dim
            ),
        )));
    }
    let params = state.params.values();
    let scores = match &state.arch {
        Arch::Dae { encoder, decoder } => dae::scores(encoder, decoder, params, batch)?,
        Arch::MemAe {
            encoder,
            decoder,
            memory_dim,
            latent,
        } => memae::scores(
            encoder,
            decoder,
            *memory_dim,
            *latent,
            params,
            batch,
            state.config.memae_shrink_threshold,
        )?,
        Arch::DeepSvdd { net } => {
            let center = state.center.as_deref().ok_or(ModelError::CenterUnset)?;
            svdd::scores(net, params, batch, center)?
        }
        Arch::Dsebm { input_dim, hidden } => dsebm::scores(
            *input_dim,
            *hidden,
            params,
            batch,
            state.config.dsebm_score_reconstruction,
        )?,
        Arch::NeuTraLad {
            encoder,
            transform,
            num_transforms,
        } => neutralad::scores(
            encoder,
            transform,
            *num_transforms,
            params,
            batch,
            state.config.neutralad_trans_kind,
            state.config.neutralad_temperature,
        )?,
    };
    if let Some(sample) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ModelError::NonFiniteScore { sample });
    }
    Ok(ScoreVector::new(scores))
}

/// Fix the DeepSVDD hypersphere center to the mean embedding of
/// `train_data` under the current (initial) weights. Coordinates with
/// magnitude below 0.1 are pushed to +-0.1, keeping their sign, so the
/// network cannot collapse onto the center.
pub fn init_svdd_center(state: &mut ModelState, train_data: &Matrix) -> Result<(), ModelError> {
    let Arch::DeepSvdd { net } = &state.arch else {
        return Err(ModelError::Config(format!(
            "init_svdd_center called on a {} model",
            state.kind()
        )));
    };
    if train_data.rows() == 0 {
        return Err(ModelError::Config(
            "cannot initialize center from empty training data".into(),
        ));
    }
    let phi = crate::numeric::forward(net, state.params.values(), train_data)?;
    let n = phi.rows() as f64;
    let mut center = vec![0.0; phi.cols()];
    for r in 0..phi.rows() {
        for (c, &v) in center.iter_mut().zip(phi.row(r)) {
            *c += v;
        }
    }
    for c in center.iter_mut() {
        *c /= n;
        if c.abs() < 0.1 {
            *c = if *c >= 0.0 { 0.1 } else { -0.1 };
        }
    }
    state.center = Some(center);
    Ok(())
}
