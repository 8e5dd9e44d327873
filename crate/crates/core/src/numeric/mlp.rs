//! Fixed-topology multilayer perceptron: spec, initialization, forward with
//! cached activations, and the matching backward pass.
//!
//! Parameters live in a flat slice whose layout is, per layer, the weight
//! matrix (input width x output width, row-major) followed by the bias when
//! enabled. The layout is a pure function of the [`MlpSpec`].

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::{Matrix, NumericError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => stable_sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
pub(crate) fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Architecture of one feed-forward network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    biases: Vec<bool>,
}

impl MlpSpec {
    /// `widths` runs input -> hidden... -> output; `activations` and
    /// `biases` have one entry per layer (= `widths.len() - 1`).
    pub fn new(
        widths: Vec<usize>,
        activations: Vec<Activation>,
        biases: Vec<bool>,
    ) -> Result<Self, NumericError> {
        if widths.len() < 2 {
            return Err(NumericError::InvalidSpec(
                "need at least input and output widths".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(NumericError::InvalidSpec("zero layer width".into()));
        }
        let layers = widths.len() - 1;
        if activations.len() != layers || biases.len() != layers {
            return Err(NumericError::InvalidSpec(format!(
                "expected {} activation/bias entries, got {}/{}",
                layers,
                activations.len(),
                biases.len()
            )));
        }
        Ok(Self {
            widths,
            activations,
            biases,
        })
    }

    /// Uniform shorthand: every hidden layer `hidden_act`, final layer
    /// `output_act`, one bias flag for all layers.
    pub fn with_uniform(
        widths: Vec<usize>,
        hidden_act: Activation,
        output_act: Activation,
        bias: bool,
    ) -> Result<Self, NumericError> {
        let layers = widths.len().saturating_sub(1);
        let mut acts = vec![hidden_act; layers];
        if let Some(last) = acts.last_mut() {
            *last = output_act;
        }
        Self::new(widths, acts, vec![bias; layers])
    }

    #[inline]
    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    #[inline]
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self, layer: usize) -> Activation {
        self.activations[layer]
    }

    pub fn has_bias(&self, layer: usize) -> bool {
        self.biases[layer]
    }

    fn weight_len(&self, layer: usize) -> usize {
        self.widths[layer] * self.widths[layer + 1]
    }

    fn layer_len(&self, layer: usize) -> usize {
        self.weight_len(layer)
            + if self.biases[layer] {
                self.widths[layer + 1]
            } else {
                0
            }
    }

    /// Total number of parameters under this spec's layout.
    pub fn param_len(&self) -> usize {
        (0..self.layer_count()).map(|l| self.layer_len(l)).sum()
    }

    /// Start offset of a layer's segment inside the flat parameter slice.
    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer).map(|l| self.layer_len(l)).sum()
    }

    /// (weights, bias) views for one layer.
    pub fn layer_params<'a>(
        &self,
        params: &'a [f64],
        layer: usize,
    ) -> (&'a [f64], Option<&'a [f64]>) {
        let off = self.layer_offset(layer);
        let wlen = self.weight_len(layer);
        let w = &params[off..off + wlen];
        let b = if self.biases[layer] {
            Some(&params[off + wlen..off + wlen + self.widths[layer + 1]])
        } else {
            None
        };
        (w, b)
    }

    fn layer_params_mut<'a>(
        &self,
        params: &'a mut [f64],
        layer: usize,
    ) -> (&'a mut [f64], Option<&'a mut [f64]>) {
        let off = self.layer_offset(layer);
        let wlen = self.weight_len(layer);
        let (w, rest) = params[off..off + self.layer_len(layer)].split_at_mut(wlen);
        let b = if self.biases[layer] { Some(rest) } else { None };
        (w, b)
    }

    /// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases,
    /// drawn layer by layer in row-major order from `rng`.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.param_len()];
        for l in 0..self.layer_count() {
            let limit = (6.0 / (self.widths[l] + self.widths[l + 1]) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let (w, _) = self.layer_params_mut(&mut params, l);
            for v in w {
                *v = dist.sample(rng);
            }
        }
        params
    }
}

/// Per-layer activations retained by [`forward_cached`] for the backward
/// pass. Holds the input batch and every layer's post-activation output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    widths: Vec<usize>,
    input: Matrix,
    /// Post-activation output of each layer; the last one is the network
    /// output.
    layer_outputs: Vec<Matrix>,
}

impl ForwardCache {
    /// Network output (last layer's activation).
    pub fn output(&self) -> &Matrix {
        self.layer_outputs.last().unwrap()
    }

    fn layer_input(&self, layer: usize) -> &Matrix {
        if layer == 0 {
            &self.input
        } else {
            &self.layer_outputs[layer - 1]
        }
    }
}

fn check_forward_args(spec: &MlpSpec, params: &[f64], batch: &Matrix) -> Result<(), NumericError> {
    if batch.cols() != spec.input_dim() {
        return Err(NumericError::DimensionMismatch(format!(
            "batch has {} columns, spec expects {}",
            batch.cols(),
            spec.input_dim()
        )));
    }
    if params.len() != spec.param_len() {
        return Err(NumericError::LengthMismatch {
            expected: spec.param_len(),
            got: params.len(),
        });
    }
    Ok(())
}

/// One affine + activation layer over a whole batch.
fn layer_forward(
    spec: &MlpSpec,
    params: &[f64],
    layer: usize,
    input: &Matrix,
) -> Result<Matrix, NumericError> {
    let (w, b) = spec.layer_params(params, layer);
    let out_w = spec.widths()[layer + 1];
    let act = spec.activation(layer);
    let mut out = vec![0.0; input.rows() * out_w];
    for r in 0..input.rows() {
        let x = input.row(r);
        let o = &mut out[r * out_w..(r + 1) * out_w];
        if let Some(b) = b {
            o.copy_from_slice(b);
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let w_row = &w[i * out_w..(i + 1) * out_w];
            for (oj, &wij) in o.iter_mut().zip(w_row) {
                *oj += xi * wij;
            }
        }
        for oj in o.iter_mut() {
            *oj = act.apply(*oj);
        }
    }
    let out = Matrix::from_raw(input.rows(), out_w, out);
    if out.first_non_finite().is_some() {
        return Err(NumericError::NonFinite(format!("output of layer {layer}")));
    }
    Ok(out)
}

/// Forward pass retaining per-layer activations for [`backward`].
pub fn forward_cached(
    spec: &MlpSpec,
    params: &[f64],
    batch: &Matrix,
) -> Result<ForwardCache, NumericError> {
    check_forward_args(spec, params, batch)?;
    let mut layer_outputs = Vec::with_capacity(spec.layer_count());
    for l in 0..spec.layer_count() {
        let input = if l == 0 { batch } else { &layer_outputs[l - 1] };
        layer_outputs.push(layer_forward(spec, params, l, input)?);
    }
    Ok(ForwardCache {
        widths: spec.widths().to_vec(),
        input: batch.clone(),
        layer_outputs,
    })
}

/// Forward pass without a cache, for scoring.
pub fn forward(spec: &MlpSpec, params: &[f64], batch: &Matrix) -> Result<Matrix, NumericError> {
    check_forward_args(spec, params, batch)?;
    let mut current = batch.clone();
    for l in 0..spec.layer_count() {
        current = layer_forward(spec, params, l, &current)?;
    }
    Ok(current)
}

/// Backward pass through a cached forward call.
///
/// `grad_output` is the loss gradient with respect to the network output;
/// parameter gradients are summed over the batch (any 1/n normalization
/// belongs in `grad_output`). Returns the gradient in the flat parameter
/// layout of `spec` together with the gradient with respect to the input
/// batch.
pub fn backward(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    grad_output: &Matrix,
) -> Result<(Vec<f64>, Matrix), NumericError> {
    if cache.widths != spec.widths() {
        return Err(NumericError::StaleCache(
            "cache was produced under a different spec".into(),
        ));
    }
    if params.len() != spec.param_len() {
        return Err(NumericError::LengthMismatch {
            expected: spec.param_len(),
            got: params.len(),
        });
    }
    let out = cache.output();
    if grad_output.rows() != out.rows() || grad_output.cols() != out.cols() {
        return Err(NumericError::DimensionMismatch(format!(
            "grad_output is {}x{}, output was {}x{}",
            grad_output.rows(),
            grad_output.cols(),
            out.rows(),
            out.cols()
        )));
    }

    let mut grads = vec![0.0; spec.param_len()];
    let mut d_out = grad_output.clone();
    for l in (0..spec.layer_count()).rev() {
        let y = &cache.layer_outputs[l];
        let input = cache.layer_input(l);
        let act = spec.activation(l);
        let out_w = spec.widths()[l + 1];

        // dZ = dY ⊙ act'(Y)
        let mut dz = d_out;
        for (z, &yv) in dz.data_mut().iter_mut().zip(y.data()) {
            *z *= act.grad_from_output(yv);
        }

        // dW = input^T * dZ ; db = column sums of dZ
        let dw = input.matmul_at(&dz)?;
        {
            let (gw, gb) = spec.layer_params_mut(&mut grads, l);
            gw.copy_from_slice(dw.data());
            if let Some(gb) = gb {
                for r in 0..dz.rows() {
                    for (g, &z) in gb.iter_mut().zip(dz.row(r)) {
                        *g += z;
                    }
                }
            }
        }

        // dInput = dZ * W^T
        let (w, _) = spec.layer_params(params, l);
        let w_m = Matrix::from_raw(spec.widths()[l], out_w, w.to_vec());
        d_out = dz.matmul_bt(&w_m)?;
    }
    Ok((grads, d_out))
}
