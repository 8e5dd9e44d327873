//! Memory-augmented autoencoder.
//!
//! The encoder output addresses a learned memory matrix through a row-wise
//! softmax; addressing weights below the shrink threshold are zeroed (hard
//! shrinkage) and the row is renormalized to sum to one before the retrieved
//! latent is decoded. Training adds a small entropy regularizer on the
//! addressing weights; scoring is plain per-sample reconstruction error.
//!
//! The memory matrix is an ordinary trainable parameter and therefore takes
//! part in federated aggregation like any weight; no server-side treatment
//! is given to the prototypes it stores.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::numeric::{
    backward, forward, forward_cached, Activation, Matrix, MlpSpec, NumericError,
};

use super::{encoder_widths, Arch, ModelConfig, ModelError};

pub(crate) fn build_arch(config: &ModelConfig, input_dim: usize) -> Result<Arch, ModelError> {
    let enc_widths = encoder_widths(input_dim, config.latent_dim, &config.encoder_widths);
    let dec_widths: Vec<usize> = enc_widths.iter().rev().copied().collect();
    let encoder = MlpSpec::with_uniform(enc_widths, Activation::Relu, Activation::Linear, true)?;
    let decoder = MlpSpec::with_uniform(dec_widths, Activation::Relu, Activation::Linear, true)?;
    Ok(Arch::MemAe {
        encoder,
        decoder,
        memory_dim: config.memae_memory_dim,
        latent: config.latent_dim,
    })
}

/// Memory matrix is (memory_dim x latent), row-major, one prototype per row.
pub(crate) fn init_memory<R: Rng + ?Sized>(
    memory_dim: usize,
    latent: usize,
    rng: &mut R,
) -> Vec<f64> {
    let limit = (6.0 / (memory_dim + latent) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    (0..memory_dim * latent).map(|_| dist.sample(rng)).collect()
}

fn split_params<'a>(
    params: &'a [f64],
    encoder: &MlpSpec,
    decoder: &MlpSpec,
) -> (&'a [f64], &'a [f64], &'a [f64]) {
    let (enc, rest) = params.split_at(encoder.param_len());
    let (dec, mem) = rest.split_at(decoder.param_len());
    (enc, dec, mem)
}

/// Addressing pipeline: similarities -> row softmax -> hard shrink ->
/// renormalize. Returns (softmax weights, shrunk+renormalized weights,
/// per-row kept mass before renormalization).
pub(crate) fn addressing(
    z: &Matrix,
    memory: &[f64],
    memory_dim: usize,
    latent: usize,
    shrink: f64,
) -> Result<(Matrix, Matrix, Vec<f64>), NumericError> {
    let mem = Matrix::from_raw(memory_dim, latent, memory.to_vec());
    let sims = z.matmul_bt(&mem)?; // n x memory_dim
    let n = sims.rows();
    let mut soft = Matrix::zeros(n, memory_dim);
    let mut hard = Matrix::zeros(n, memory_dim);
    let mut kept_mass = vec![0.0; n];
    for r in 0..n {
        let row = sims.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (j, &s) in row.iter().enumerate() {
            let e = (s - max).exp();
            soft.set(r, j, e);
            sum += e;
        }
        let mut kept = 0.0;
        for j in 0..memory_dim {
            let w = soft.get(r, j) / sum;
            soft.set(r, j, w);
            if w >= shrink {
                hard.set(r, j, w);
                kept += w;
            }
        }
        if kept <= 0.0 {
            return Err(NumericError::NonFinite(format!(
                "memae shrinkage zeroed the whole addressing row {r}"
            )));
        }
        for j in 0..memory_dim {
            hard.set(r, j, hard.get(r, j) / kept);
        }
        kept_mass[r] = kept;
    }
    Ok((soft, hard, kept_mass))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn loss_and_grad(
    encoder: &MlpSpec,
    decoder: &MlpSpec,
    memory_dim: usize,
    latent: usize,
    params: &[f64],
    batch: &Matrix,
    shrink: f64,
    entropy_weight: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    let (enc_p, dec_p, mem_p) = split_params(params, encoder, decoder);
    let n = batch.rows();
    let nf = n as f64;

    let enc_cache = forward_cached(encoder, enc_p, batch)?;
    let z = enc_cache.output();
    let (soft, hard, kept_mass) = addressing(z, mem_p, memory_dim, latent, shrink)?;
    let mem = Matrix::from_raw(memory_dim, latent, mem_p.to_vec());
    let retrieved = hard.matmul(&mem)?; // n x latent
    let dec_cache = forward_cached(decoder, dec_p, &retrieved)?;
    let recon = dec_cache.output();

    // reconstruction loss + addressing entropy
    let n_el = (n * batch.cols()) as f64;
    let mut mse = 0.0;
    let mut grad_out = Matrix::zeros(n, batch.cols());
    for r in 0..n {
        for c in 0..batch.cols() {
            let d = recon.get(r, c) - batch.get(r, c);
            mse += d * d;
            grad_out.set(r, c, 2.0 * d / n_el);
        }
    }
    mse /= n_el;
    let mut entropy = 0.0;
    for r in 0..n {
        for j in 0..memory_dim {
            let w = hard.get(r, j);
            if w > 0.0 {
                entropy -= w * w.ln();
            }
        }
    }
    let loss = mse + entropy_weight * entropy / nf;

    // backward: decoder, retrieval, renormalize, shrink mask, softmax, encoder
    let (dec_grads, d_retrieved) = backward(decoder, dec_p, &dec_cache, &grad_out)?;

    // retrieval: retrieved = hard * mem
    let mut d_hard = d_retrieved.matmul_bt(&mem)?; // n x memory_dim
    let mut d_mem = hard.matmul_at(&d_retrieved)?; // memory_dim x latent

    // entropy term: d(-w ln w)/dw = -(ln w + 1) on kept entries
    if entropy_weight != 0.0 {
        for r in 0..n {
            for j in 0..memory_dim {
                let w = hard.get(r, j);
                if w > 0.0 {
                    let g = d_hard.get(r, j) - entropy_weight / nf * (w.ln() + 1.0);
                    d_hard.set(r, j, g);
                }
            }
        }
    }

    // renormalization (hard = kept/mass) then mask then row softmax
    let mut d_sims = Matrix::zeros(n, memory_dim);
    for r in 0..n {
        let g_dot: f64 = (0..memory_dim)
            .map(|j| d_hard.get(r, j) * hard.get(r, j))
            .sum();
        let mut d_soft = vec![0.0; memory_dim];
        for (j, ds) in d_soft.iter_mut().enumerate() {
            if soft.get(r, j) >= shrink {
                *ds = (d_hard.get(r, j) - g_dot) / kept_mass[r];
            }
        }
        let dot: f64 = (0..memory_dim).map(|j| d_soft[j] * soft.get(r, j)).sum();
        for j in 0..memory_dim {
            d_sims.set(r, j, soft.get(r, j) * (d_soft[j] - dot));
        }
    }

    // sims = z * mem^T
    let d_z = d_sims.matmul(&mem)?; // n x latent
    let d_mem_sim = d_sims.matmul_at(z)?; // memory_dim x latent
    for (a, b) in d_mem.data_mut().iter_mut().zip(d_mem_sim.data()) {
        *a += b;
    }

    let (enc_grads, _) = backward(encoder, enc_p, &enc_cache, &d_z)?;

    let mut grads = enc_grads;
    grads.extend(dec_grads);
    grads.extend_from_slice(d_mem.data());
    Ok((loss, grads))
}

/// Per-sample mean squared reconstruction error through the memory path.
pub(crate) fn scores(
    encoder: &MlpSpec,
    decoder: &MlpSpec,
    memory_dim: usize,
    latent: usize,
    params: &[f64],
    batch: &Matrix,
    shrink: f64,
) -> Result<Vec<f64>, ModelError> {
    let (enc_p, dec_p, mem_p) = split_params(params, encoder, decoder);
    let z = forward(encoder, enc_p, batch)?;
    let (_, hard, _) = addressing(&z, mem_p, memory_dim, latent, shrink)?;
    let mem = Matrix::from_raw(memory_dim, latent, mem_p.to_vec());
    let retrieved = hard.matmul(&mem)?;
    let recon = forward(decoder, dec_p, &retrieved)?;
    let d = batch.cols() as f64;
    Ok((0..batch.rows())
        .map(|r| {
            batch
                .row(r)
                .iter()
                .zip(recon.row(r))
                .map(|(x, y)| (y - x) * (y - x))
                .sum::<f64>()
                / d
        })
        .collect())
}

/// Addressing weights for a batch (softmax stage, shrunk+renormalized
/// stage); exposed for invariant checks.
#[cfg(test)]
pub(crate) fn addressing_weights(
    encoder: &MlpSpec,
    params: &[f64],
    decoder: &MlpSpec,
    memory_dim: usize,
    latent: usize,
    batch: &Matrix,
    shrink: f64,
) -> Result<(Matrix, Matrix), ModelError> {
    let (enc_p, _, mem_p) = split_params(params, encoder, decoder);
    let z = forward(encoder, enc_p, batch)?;
    let (soft, hard, _) = addressing(&z, mem_p, memory_dim, latent, shrink)?;
    Ok((soft, hard))
}
