//! Neural transformation learning.
//!
//! K learned transformation networks produce K views of each sample; a
//! shared encoder embeds the original and all views. The per-sample
//! deterministic contrastive loss pulls each transformed embedding toward
//! the original and pushes it away from the other transformed embeddings
//! (cosine similarity, temperature tau). The same per-sample loss value is
//! the anomaly score at inference.

use crate::numeric::{
    backward, forward_cached, stable_sigmoid, Activation, ForwardCache, Matrix, MlpSpec,
    NumericError,
};

use super::{encoder_widths, Arch, ModelConfig, ModelError, TransformKind};

pub(crate) fn build_arch(config: &ModelConfig, input_dim: usize) -> Result<Arch, ModelError> {
    let enc_spec = MlpSpec::with_uniform(
        encoder_widths(input_dim, config.latent_dim, &config.encoder_widths),
        Activation::Relu,
        Activation::Linear,
        true,
    )?;
    // each transformation: two layers at the input width
    let transform = MlpSpec::with_uniform(
        vec![input_dim, input_dim, input_dim],
        Activation::Relu,
        Activation::Linear,
        true,
    )?;
    Ok(Arch::NeuTraLad {
        encoder: enc_spec,
        transform,
        num_transforms: config.neutralad_num_transforms,
    })
}

fn param_segments<'a>(
    params: &'a [f64],
    encoder: &MlpSpec,
    transform: &MlpSpec,
    k: usize,
) -> (&'a [f64], Vec<&'a [f64]>) {
    let (enc, mut rest) = params.split_at(encoder.param_len());
    let tlen = transform.param_len();
    let mut segs = Vec::with_capacity(k);
    for _ in 0..k {
        let (seg, r) = rest.split_at(tlen);
        segs.push(seg);
        rest = r;
    }
    (enc, segs)
}

/// Views of a batch: the raw batch plus K transformed versions, with the
/// transform-net caches needed for backprop.
struct Views {
    /// v[0] is the batch itself, v[k] the k-th transformation output.
    views: Vec<Matrix>,
    /// Raw transform-net outputs (pre residual/multiplicative combination).
    net_caches: Vec<ForwardCache>,
}

fn make_views(
    batch: &Matrix,
    transform: &MlpSpec,
    t_params: &[&[f64]],
    kind: TransformKind,
) -> Result<Views, NumericError> {
    let mut views = Vec::with_capacity(t_params.len() + 1);
    let mut net_caches = Vec::with_capacity(t_params.len());
    views.push(batch.clone());
    for seg in t_params {
        let cache = forward_cached(transform, seg, batch)?;
        let net_out = cache.output();
        let mut v = Matrix::zeros(batch.rows(), batch.cols());
        match kind {
            TransformKind::Residual => {
                for i in 0..batch.rows() {
                    for j in 0..batch.cols() {
                        v.set(i, j, batch.get(i, j) + net_out.get(i, j));
                    }
                }
            }
            TransformKind::Multiplicative => {
                for i in 0..batch.rows() {
                    for j in 0..batch.cols() {
                        v.set(i, j, batch.get(i, j) * stable_sigmoid(net_out.get(i, j)));
                    }
                }
            }
        }
        views.push(v);
        net_caches.push(cache);
    }
    Ok(Views { views, net_caches })
}

struct CosGrad {
    value: f64,
    d_a: Vec<f64>,
    d_b: Vec<f64>,
}

// Norms are clamped at eps so an all-dead relu path (exact zero embedding)
// degrades to zero similarity instead of poisoning the loss; the gradient
// matches the clamped function.
const COS_EPS: f64 = 1e-8;

fn cosine(a: &[f64], b: &[f64]) -> Result<CosGrad, NumericError> {
    let na_raw: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb_raw: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let na = na_raw.max(COS_EPS);
    let nb = nb_raw.max(COS_EPS);
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let value = dot / (na * nb);
    let d_a = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| {
            let mut g = bi / (na * nb);
            if na_raw > COS_EPS {
                g -= value * ai / (na * na);
            }
            g
        })
        .collect();
    let d_b = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| {
            let mut g = ai / (na * nb);
            if nb_raw > COS_EPS {
                g -= value * bi / (nb * nb);
            }
            g
        })
        .collect();
    Ok(CosGrad { value, d_a, d_b })
}

/// Contrastive loss of one sample given its K+1 embeddings (row views),
/// optionally accumulating gradients w.r.t. those embeddings scaled by
/// `grad_scale`.
fn sample_dcl(
    z: &[Vec<f64>],
    tau: f64,
    mut grad_sink: Option<(&mut [Vec<f64>], f64)>,
) -> Result<f64, NumericError> {
    let k = z.len() - 1;
    let mut total = 0.0;
    for view in 1..=k {
        // candidate list: positive (original) first, then the other views
        let mut cand: Vec<usize> = Vec::with_capacity(k);
        cand.push(0);
        cand.extend((1..=k).filter(|&c| c != view));

        let mut cos_grads = Vec::with_capacity(cand.len());
        let mut logits = Vec::with_capacity(cand.len());
        for &c in &cand {
            let cg = cosine(&z[view], &z[c])?;
            logits.push(cg.value / tau);
            cos_grads.push(cg);
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp_sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
        total += exp_sum.ln() - (logits[0] - max);

        if let Some((dz, scale)) = grad_sink.as_mut() {
            for (slot, (&c, cg)) in cand.iter().zip(&cos_grads).enumerate() {
                let p = (logits[slot] - max).exp() / exp_sum;
                let dl = (p - if slot == 0 { 1.0 } else { 0.0 }) * *scale / tau;
                for (g, d) in dz[view].iter_mut().zip(&cg.d_a) {
                    *g += dl * d;
                }
                for (g, d) in dz[c].iter_mut().zip(&cg.d_b) {
                    *g += dl * d;
                }
            }
        }
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn loss_and_grad(
    encoder: &MlpSpec,
    transform: &MlpSpec,
    num_transforms: usize,
    params: &[f64],
    batch: &Matrix,
    kind: TransformKind,
    tau: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    let (enc_p, t_segs) = param_segments(params, encoder, transform, num_transforms);
    let views = make_views(batch, transform, &t_segs, kind)?;
    let enc_caches: Vec<ForwardCache> = views
        .views
        .iter()
        .map(|v| forward_cached(encoder, enc_p, v))
        .collect::<Result<_, _>>()?;

    let n = batch.rows();
    let latent = encoder.output_dim();
    let mut loss = 0.0;
    let mut d_z: Vec<Matrix> = (0..=num_transforms)
        .map(|_| Matrix::zeros(n, latent))
        .collect();

    for i in 0..n {
        let z: Vec<Vec<f64>> = enc_caches
            .iter()
            .map(|c| c.output().row(i).to_vec())
            .collect();
        let mut dz_rows: Vec<Vec<f64>> = vec![vec![0.0; latent]; num_transforms + 1];
        let l = sample_dcl(&z, tau, Some((&mut dz_rows, 1.0 / n as f64)))?;
        loss += l;
        for (k, row) in dz_rows.into_iter().enumerate() {
            d_z[k].row_mut(i).copy_from_slice(&row);
        }
    }
    loss /= n as f64;

    // encoder gradients accumulate over all views; each view's input
    // gradient feeds its transform net (view 0 is raw data).
    let mut enc_grads = vec![0.0; encoder.param_len()];
    let mut t_grads: Vec<Vec<f64>> = Vec::with_capacity(num_transforms);
    for k in 0..=num_transforms {
        let (g, d_view) = backward(encoder, enc_p, &enc_caches[k], &d_z[k])?;
        for (a, b) in enc_grads.iter_mut().zip(&g) {
            *a += b;
        }
        if k == 0 {
            continue;
        }
        let net_cache = &views.net_caches[k - 1];
        let mut d_net = d_view;
        if kind == TransformKind::Multiplicative {
            let net_out = net_cache.output();
            for i in 0..n {
                for j in 0..batch.cols() {
                    let s = stable_sigmoid(net_out.get(i, j));
                    let g = d_net.get(i, j) * batch.get(i, j) * s * (1.0 - s);
                    d_net.set(i, j, g);
                }
            }
        }
        let (tg, _) = backward(transform, t_segs[k - 1], net_cache, &d_net)?;
        t_grads.push(tg);
    }

    let mut grads = enc_grads;
    for tg in t_grads {
        grads.extend(tg);
    }
    Ok((loss, grads))
}

/// Per-sample deterministic contrastive loss value.
pub(crate) fn scores(
    encoder: &MlpSpec,
    transform: &MlpSpec,
    num_transforms: usize,
    params: &[f64],
    batch: &Matrix,
    kind: TransformKind,
    tau: f64,
) -> Result<Vec<f64>, ModelError> {
    let (enc_p, t_segs) = param_segments(params, encoder, transform, num_transforms);
    let views = make_views(batch, transform, &t_segs, kind)?;
    let embeddings: Vec<Matrix> = views
        .views
        .iter()
        .map(|v| crate::numeric::forward(encoder, enc_p, v))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(batch.rows());
    for i in 0..batch.rows() {
        let z: Vec<Vec<f64>> = embeddings.iter().map(|m| m.row(i).to_vec()).collect();
        out.push(sample_dcl(&z, tau, None)?);
    }
    Ok(out)
}

/// Transformation outputs of one sample under every transform net; used to
/// check that random initialization does not collapse the views.
#[cfg(test)]
pub(crate) fn transform_outputs(
    encoder: &MlpSpec,
    transform: &MlpSpec,
    num_transforms: usize,
    params: &[f64],
    batch: &Matrix,
    kind: TransformKind,
) -> Result<Vec<Matrix>, ModelError> {
    let (_, t_segs) = param_segments(params, encoder, transform, num_transforms);
    let views = make_views(batch, transform, &t_segs, kind)?;
    Ok(views.views)
}
