//! Flat parameter vector: the unit of aggregation and of the proximal
//! distance term.

use super::NumericError;

/// All trainable parameters of a model, flattened into one contiguous
/// vector. The layout (which ranges hold which layer's weights and biases)
/// is a pure function of the owning model's architecture, so two models
/// built from the same configuration have interchangeable layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Bitwise equality; distinguishes -0.0 from 0.0 and never equates NaN,
    /// which is what reproducibility checks want.
    pub fn bits_eq(&self, other: &ParamVector) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Squared Euclidean distance between two parameter vectors of equal length.
pub fn l2_distance_sq(a: &ParamVector, b: &ParamVector) -> Result<f64, NumericError> {
    if a.len() != b.len() {
        return Err(NumericError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum())
}
