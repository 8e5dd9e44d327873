//! Deep autoencoder: mirrored encoder/decoder MLPs trained on mean squared
//! reconstruction error, which is also the anomaly score.

use crate::numeric::{backward, forward, forward_cached, Activation, Matrix, MlpSpec};

use super::{encoder_widths, Arch, ModelConfig, ModelError};

pub(crate) fn build_arch(config: &ModelConfig, input_dim: usize) -> Result<Arch, ModelError> {
    let enc_widths = encoder_widths(input_dim, config.latent_dim, &config.encoder_widths);
    let dec_widths: Vec<usize> = enc_widths.iter().rev().copied().collect();
    let encoder = MlpSpec::with_uniform(enc_widths, Activation::Relu, Activation::Linear, true)?;
    let decoder = MlpSpec::with_uniform(dec_widths, Activation::Relu, Activation::Linear, true)?;
    Ok(Arch::Dae { encoder, decoder })
}

pub(crate) fn loss_and_grad(
    encoder: &MlpSpec,
    decoder: &MlpSpec,
    params: &[f64],
    batch: &Matrix,
) -> Result<(f64, Vec<f64>), ModelError> {
    let (enc_p, dec_p) = params.split_at(encoder.param_len());
    let enc_cache = forward_cached(encoder, enc_p, batch)?;
    let dec_cache = forward_cached(decoder, dec_p, enc_cache.output())?;
    let recon = dec_cache.output();

    let n_el = (batch.rows() * batch.cols()) as f64;
    let mut loss = 0.0;
    let mut grad_out = Matrix::zeros(batch.rows(), batch.cols());
    for r in 0..batch.rows() {
        for c in 0..batch.cols() {
            let d = recon.get(r, c) - batch.get(r, c);
            loss += d * d;
            grad_out.set(r, c, 2.0 * d / n_el);
        }
    }
    loss /= n_el;

    let (dec_grads, d_latent) = backward(decoder, dec_p, &dec_cache, &grad_out)?;
    let (enc_grads, _) = backward(encoder, enc_p, &enc_cache, &d_latent)?;
    let mut grads = enc_grads;
    grads.extend(dec_grads);
    Ok((loss, grads))
}

/// Per-sample mean squared reconstruction error.
pub(crate) fn scores(
    encoder: &MlpSpec,
    decoder: &MlpSpec,
    params: &[f64],
    batch: &Matrix,
) -> Result<Vec<f64>, ModelError> {
    let (enc_p, dec_p) = params.split_at(encoder.param_len());
    let latent = forward(encoder, enc_p, batch)?;
    let recon = forward(decoder, dec_p, &latent)?;
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
