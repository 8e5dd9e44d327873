//! Structured energy network over tabular rows.
//!
//! Energy of a sample: `E(x) = 0.5*||x - b'||^2 - sum_j softplus(W^T x + b)_j`
//! with `W: d x h`, `b: h`, `b': d` all trainable. Training minimizes the
//! mean squared error between `x` and its one-step reconstruction
//! `x - grad_x E(x) = b' + W*sigmoid(W^T x + b)`.
//!
//! The default anomaly score is `softplus(E(x))`: a strictly increasing map
//! of the energy, so every ranking metric and threshold search sees the
//! energy ordering while scores stay non-negative. The reconstruction error
//! is available behind `dsebm_score_reconstruction`.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::numeric::{Matrix, NumericError};

use super::{Arch, ModelConfig, ModelError};

pub(crate) fn build_arch(config: &ModelConfig, input_dim: usize) -> Result<Arch, ModelError> {
    Ok(Arch::Dsebm {
        input_dim,
        hidden: config.latent_dim,
    })
}

/// Layout: [W (d*h, row-major d x h) | b (h) | b' (d)].
pub(crate) fn init_params<R: Rng + ?Sized>(d: usize, h: usize, rng: &mut R) -> Vec<f64> {
    let mut params = vec![0.0; d * h + h + d];
    let limit = (6.0 / (d + h) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    for w in params[..d * h].iter_mut() {
        *w = dist.sample(rng);
    }
    params
}

fn split(params: &[f64], d: usize, h: usize) -> (&[f64], &[f64], &[f64]) {
    let (w, rest) = params.split_at(d * h);
    let (b, b_prime) = rest.split_at(h);
    (w, b, b_prime)
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    crate::numeric::stable_sigmoid(z)
}

/// Pre-activations `z = x W + b` (n x h).
fn preactivations(
    d: usize,
    h: usize,
    params: &[f64],
    batch: &Matrix,
) -> Result<Matrix, NumericError> {
    let (w, b, _) = split(params, d, h);
    let mut z = vec![0.0; batch.rows() * h];
    for r in 0..batch.rows() {
        let zr = &mut z[r * h..(r + 1) * h];
        zr.copy_from_slice(b);
        for (i, &x) in batch.row(r).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (zj, &wij) in zr.iter_mut().zip(&w[i * h..(i + 1) * h]) {
                *zj += x * wij;
            }
        }
    }
    let z = Matrix::from_raw(batch.rows(), h, z);
    if z.first_non_finite().is_some() {
        return Err(NumericError::NonFinite("dsebm pre-activations".into()));
    }
    Ok(z)
}

/// Reconstruction `b' + sigmoid(z) W^T` and the sigmoid activations.
fn reconstruct(
    d: usize,
    h: usize,
    params: &[f64],
    batch: &Matrix,
) -> Result<(Matrix, Matrix), NumericError> {
    let (w, _, b_prime) = split(params, d, h);
    let z = preactivations(d, h, params, batch)?;
    let mut s = z;
    for v in s.data_mut() {
        *v = sigmoid(*v);
    }
    let mut xhat = vec![0.0; batch.rows() * d];
    for r in 0..batch.rows() {
        let out = &mut xhat[r * d..(r + 1) * d];
        out.copy_from_slice(b_prime);
        let srow = s.row(r);
        for (k, o) in out.iter_mut().enumerate() {
            let wrow = &w[k * h..(k + 1) * h];
            *o += srow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok((Matrix::from_raw(batch.rows(), d, xhat), s))
}

pub(crate) fn loss_and_grad(
    d: usize,
    h: usize,
    params: &[f64],
    batch: &Matrix,
) -> Result<(f64, Vec<f64>), ModelError> {
    let (w, _, _) = split(params, d, h);
    let (xhat, s) = reconstruct(d, h, params, batch)?;
    let n = batch.rows();
    let n_el = (n * d) as f64;

    let mut loss = 0.0;
    let mut g = Matrix::zeros(n, d); // dL/dxhat
    for r in 0..n {
        for c in 0..d {
            let diff = xhat.get(r, c) - batch.get(r, c);
            loss += diff * diff;
            g.set(r, c, 2.0 * diff / n_el);
        }
    }
    loss /= n_el;

    let mut grads = vec![0.0; params.len()];
    {
        let (gw, rest) = grads.split_at_mut(d * h);
        let (gb, gb_prime) = rest.split_at_mut(h);

        // xhat = b' + s W^T
        for r in 0..n {
            for (gbp, &gv) in gb_prime.iter_mut().zip(g.row(r)) {
                *gbp += gv;
            }
        }
        // dW (retrieval path): dW[k][j] += G[r][k] * s[r][j]
        for r in 0..n {
            let grow = g.row(r);
            let srow = s.row(r);
            for (k, &gv) in grow.iter().enumerate() {
                if gv == 0.0 {
                    continue;
                }
                for (j, &sv) in srow.iter().enumerate() {
                    gw[k * h + j] += gv * sv;
                }
            }
        }
        // dS = G W ; dZ = dS * s(1-s)
        for r in 0..n {
            let grow = g.row(r);
            let srow = s.row(r);
            let mut dz = vec![0.0; h];
            for (k, &gv) in grow.iter().enumerate() {
                if gv == 0.0 {
                    continue;
                }
                for (j, dzj) in dz.iter_mut().enumerate() {
                    *dzj += gv * w[k * h + j];
                }
            }
            for (j, dzj) in dz.iter_mut().enumerate() {
                *dzj *= srow[j] * (1.0 - srow[j]);
            }
            // z = x W + b
            for (j, &dzj) in dz.iter().enumerate() {
                gb[j] += dzj;
            }
            for (i, &x) in batch.row(r).iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (j, &dzj) in dz.iter().enumerate() {
                    gw[i * h + j] += x * dzj;
                }
            }
        }
    }
    Ok((loss, grads))
}

fn energies(d: usize, h: usize, params: &[f64], batch: &Matrix) -> Result<Vec<f64>, ModelError> {
    let (_, _, b_prime) = split(params, d, h);
    let z = preactivations(d, h, params, batch)?;
    Ok((0..batch.rows())
        .map(|r| {
            let sq: f64 = batch
                .row(r)
                .iter()
                .zip(b_prime)
                .map(|(&x, &b)| (x - b) * (x - b))
                .sum();
            let sp: f64 = z.row(r).iter().map(|&v| softplus(v)).sum();
            0.5 * sq - sp
        })
        .collect())
}

pub(crate) fn scores(
    d: usize,
    h: usize,
    params: &[f64],
    batch: &Matrix,
    use_reconstruction: bool,
) -> Result<Vec<f64>, ModelError> {
    if use_reconstruction {
        let (xhat, _) = reconstruct(d, h, params, batch)?;
        let dd = d as f64;
        Ok((0..batch.rows())
            .map(|r| {
                batch
                    .row(r)
                    .iter()
                    .zip(xhat.row(r))
                    .map(|(x, y)| (y - x) * (y - x))
                    .sum::<f64>()
                    / dd
            })
            .collect())
    } else {
        Ok(energies(d, h, params, batch)?
            .into_iter()
            .map(softplus)
            .collect())
    }
}
