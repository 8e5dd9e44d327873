//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::NumericError;

/// Optimizer state for one flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Conventional constants beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(len: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Zero both moment vectors and the step counter, keeping the
    /// hyperparameters.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.step = 0;
    }
}

/// One Adam update in place.
///
/// Weight decay is decoupled: `params <- params - lr*wd*params` before the
/// moment update, so the gradient stream carries only the training
/// objective (and, under FedProx, the proximal term).
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
) -> Result<(), NumericError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NumericError::LengthMismatch {
            expected: params.len(),
            got: if grads.len() != params.len() {
                grads.len()
            } else {
                state.m.len()
            },
        });
    }
    let lr = state.lr;
    if state.weight_decay != 0.0 && lr != 0.0 {
        let shrink = lr * state.weight_decay;
        for p in params.iter_mut() {
            *p -= shrink * *p;
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_zero_decay_leave_params_unchanged() {
        let mut p = vec![0.5, -1.5];
        let g = vec![0.0, 0.0];
        let mut st = AdamState::new(2, 1e-3, 0.0);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, vec![0.5, -1.5]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![1.0, 1.0];
        let g = vec![3.0, -0.25];
        let mut st = AdamState::new(2, 1e-2, 0.0);
        adam_step(&mut p, &g, &mut st).unwrap();
        // bias-corrected first step: -lr * g/(|g| + eps') ~= -lr*sign(g)
        assert!((p[0] - (1.0 - 1e-2)).abs() < 1e-6);
        assert!((p[1] - (1.0 + 1e-2)).abs() < 1e-6);
    }

    #[test]
    fn three_step_trace_matches_scalar_recursion_oracle() {
        let mut p = vec![0.7];
        let mut st = AdamState::new(1, 1e-3, 0.0);
        let gs = [0.9, -0.3, 0.45];

        // independent scalar recursion
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 1e-3);
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut w = 0.7f64;
        for (t, &g) in gs.iter().enumerate() {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32 + 1));
            let vh = v / (1.0 - b2.powi(t as i32 + 1));
            w -= lr * mh / (vh.sqrt() + eps);
        }

        for &g in &gs {
            adam_step(&mut p, &[g], &mut st).unwrap();
        }
        assert!((p[0] - w).abs() <= 1e-12, "{} vs {w}", p[0]);
    }

    #[test]
    fn lr_zero_is_identity_even_with_decay() {
        let mut p = vec![2.0, -3.0];
        let g = vec![1.0, 1.0];
        let mut st = AdamState::new(2, 0.0, 1e-4);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, vec![2.0, -3.0]);
    }

    #[test]
    fn decay_shrinks_before_moment_update() {
        let mut p = vec![1.0];
        let g = vec![0.0];
        let mut st = AdamState::new(1, 1e-1, 1e-1);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert!((p[0] - (1.0 - 1e-2)).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_a_usage_error() {
        let mut p = vec![0.0; 2];
        let mut st = AdamState::new(2, 1e-3, 0.0);
        assert!(adam_step(&mut p, &[0.0; 3], &mut st).is_err());
    }
}
