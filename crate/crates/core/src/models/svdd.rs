//! Deep SVDD: a bias-free network maps samples near a fixed hypersphere
//! center; the anomaly score is the squared distance from that center.

use crate::numeric::{backward, forward, forward_cached, Activation, Matrix, MlpSpec};

use super::{encoder_widths, Arch, ModelConfig, ModelError};

pub(crate) fn build_arch(config: &ModelConfig, input_dim: usize) -> Result<Arch, ModelError> {
    let widths = encoder_widths(
        input_dim,
        config.svdd_output_features,
        &config.encoder_widths,
    );
    // bias-free: an affine offset would let the network drift onto the center
    let net = MlpSpec::with_uniform(widths, Activation::Relu, Activation::Linear, false)?;
    Ok(Arch::DeepSvdd { net })
}

pub(crate) fn loss_and_grad(
    net: &MlpSpec,
    params: &[f64],
    batch: &Matrix,
    center: &[f64],
) -> Result<(f64, Vec<f64>), ModelError> {
    let cache = forward_cached(net, params, batch)?;
    let phi = cache.output();
    let n = batch.rows() as f64;
    let mut loss = 0.0;
    let mut grad_out = Matrix::zeros(phi.rows(), phi.cols());
    for r in 0..phi.rows() {
        for (j, (&p, &c)) in phi.row(r).iter().zip(center).enumerate() {
            let d = p - c;
            loss += d * d;
            grad_out.set(r, j, 2.0 * d / n);
        }
    }
    loss /= n;
    let (grads, _) = backward(net, params, &cache, &grad_out)?;
    Ok((loss, grads))
}

/// Squared distance to the fixed center.
pub(crate) fn scores(
    net: &MlpSpec,
    params: &[f64],
    batch: &Matrix,
    center: &[f64],
) -> Result<Vec<f64>, ModelError> {
    let phi = forward(net, params, batch)?;
    Ok((0..phi.rows())
        .map(|r| {
            phi.row(r)
                .iter()
                .zip(center)
                .map(|(&p, &c)| (p - c) * (p - c))
                .sum()
        })
        .collect())
}
