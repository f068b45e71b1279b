//! Positive vectors over a sample space and the log-density query interface
//! used by score evaluation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Read access to `log f_z` for the points a score needs.
pub trait LogDensity {
    /// `None` when `z` lies outside the available support.
    fn log_f(&self, z: usize) -> Option<f64>;
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn log_f(&self, z: usize) -> Option<f64> {
        (**self).log_f(z)
    }
}

impl LogDensity for [f64] {
    fn log_f(&self, z: usize) -> Option<f64> {
        self.get(z).copied()
    }
}

impl LogDensity for Vec<f64> {
    fn log_f(&self, z: usize) -> Option<f64> {
        self.get(z).copied()
    }
}

impl LogDensity for BTreeMap<usize, f64> {
    fn log_f(&self, z: usize) -> Option<f64> {
        self.get(&z).copied()
    }
}

/// Adapter turning a closure `z ↦ log f_z` into a [`LogDensity`] defined
/// everywhere.
#[derive(Clone, Copy)]
pub struct FnDensity<F>(pub F);

impl<F: Fn(usize) -> f64> LogDensity for FnDensity<F> {
    fn log_f(&self, z: usize) -> Option<f64> {
        Some((self.0)(z))
    }
}

/// Element of `F = R_{++}^Y`, stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct UnnormalizedVector {
    log_values: Vec<f64>,
}

impl UnnormalizedVector {
    pub fn from_log(log_values: Vec<f64>) -> Result<Self> {
        if let Some(i) = log_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("log value at {i} is not finite")));
        }
        Ok(Self { log_values })
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        if let Some(i) = values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "entry {i} must be strictly positive and finite"
            )));
        }
        Self::from_log(values.iter().map(|&v| math::ln(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn value(&self, y: usize) -> f64 {
        math::exp(self.log_values[y])
    }

    /// `λ f` for `λ > 0`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let shift = math::ln(lambda);
        Self {
            log_values: self.log_values.iter().map(|v| v + shift).collect(),
        }
    }

    pub fn normalized(&self) -> Probability {
        let lz = math::log_sum_exp_slice(&self.log_values);
        Probability {
            weights: self.log_values.iter().map(|v| math::exp(v - lz)).collect(),
        }
    }
}

impl LogDensity for UnnormalizedVector {
    fn log_f(&self, z: usize) -> Option<f64> {
        self.log_values.get(z).copied()
    }
}

/// Strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Probability {
    weights: Vec<f64>,
}

impl Probability {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "probability entry {i} must be strictly positive"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if math::abs(sum - 1.0) > Self::SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Normalizes arbitrary positive weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidInput("weights must have positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: alloc::vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn to_unnormalized(&self) -> UnnormalizedVector {
        UnnormalizedVector {
            log_values: self.weights.iter().map(|&w| math::ln(w)).collect(),
        }
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.weights.iter().map(|&w| w * math::ln(w)).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &Probability) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &Probability) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| math::abs(a - b))
            .sum::<f64>()
    }
}

impl LogDensity for Probability {
    fn log_f(&self, z: usize) -> Option<f64> {
        self.weights.get(z).map(|&w| math::ln(w))
    }
}
