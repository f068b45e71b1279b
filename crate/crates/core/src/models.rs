//! Parameterized unnormalized models: fully visible Boltzmann machines,
//! log-linear conditional label models, and saturated tabular models.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::density::{FnDensity, Probability, UnnormalizedVector};
use crate::error::{Error, Result};
use crate::math;
use crate::space::SampleSpace;

/// A model over a sample space exposing `log f_θ(y)` and its parameter
/// gradient.
pub trait UnnormalizedModel {
    fn space(&self) -> SampleSpace;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// `log f_θ(y)`; `y` must lie in the space.
    fn log_f(&self, y: usize) -> f64;
    /// `grad += weight · ∂log f_θ(y)/∂θ`.
    fn add_grad_log_f(&self, y: usize, weight: f64, grad: &mut [f64]);

    fn param_count(&self) -> usize {
        self.params().len()
    }

    fn checked_log_f(&self, y: usize) -> Result<f64> {
        self.space().check_point(y)?;
        Ok(self.log_f(y))
    }

    fn grad_log_f(&self, y: usize) -> Result<Vec<f64>> {
        self.space().check_point(y)?;
        let mut g = vec![0.0; self.param_count()];
        self.add_grad_log_f(y, 1.0, &mut g);
        Ok(g)
    }

    /// `log f` over the whole space.
    fn log_table(&self) -> Result<Vec<f64>> {
        let space = self.space();
        space.ensure_enumerable()?;
        Ok((0..space.size()).map(|y| self.log_f(y)).collect())
    }
}

/// `y ↦ log f_θ(y)` as a [`crate::LogDensity`] that never enumerates.
pub fn as_density<M: UnnormalizedModel + ?Sized>(model: &M) -> FnDensity<impl Fn(usize) -> f64 + '_> {
    FnDensity(move |y| model.log_f(y))
}

/// `q_θ = f_θ / Z_θ` over an enumerable space.
pub fn normalize<M: UnnormalizedModel + ?Sized>(model: &M) -> Result<Probability> {
    Ok(UnnormalizedVector::from_log(model.log_table()?)?.normalized())
}

/// `log Σ_y f_θ(y)` by enumeration.
pub fn exact_log_z<M: UnnormalizedModel + ?Sized>(model: &M) -> Result<f64> {
    Ok(math::log_sum_exp_slice(&model.log_table()?))
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("{what} entry {i} is not finite"))),
        None => Ok(()),
    }
}

/// `f_W(y) = exp(yᵀWy)` on `{±1}^D` with symmetric, zero-diagonal `W`.
///
/// Parameters are the upper triangle `W_12, W_13, …, W_{D−1,D}` in row
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannModel {
    dim: usize,
    upper: Vec<f64>,
    /// Trace of `W`; always zero except in the gauge test pathway.
    trace: f64,
}

impl BoltzmannModel {
    pub fn zeros(dim: usize) -> Result<Self> {
        SampleSpace::hypercube(dim)?;
        Ok(Self {
            dim,
            upper: vec![0.0; dim * (dim - 1) / 2],
            trace: 0.0,
        })
    }

    pub fn from_upper(dim: usize, upper: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        if upper.len() != m.upper.len() {
            return Err(Error::DimensionMismatch {
                expected: m.upper.len(),
                found: upper.len(),
            });
        }
        check_finite(&upper, "weight")?;
        m.upper = upper;
        Ok(m)
    }

    /// From a full matrix; must be symmetric with zero diagonal.
    pub fn from_matrix(w: &[Vec<f64>]) -> Result<Self> {
        let dim = w.len();
        let mut m = Self::zeros(dim)?;
        for (i, row) in w.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidInput(format!("W[{i}][{i}] must be zero")));
            }
            for j in i + 1..dim {
                if row[j] != w[j][i] {
                    return Err(Error::InvalidInput(format!("W is not symmetric at ({i},{j})")));
                }
                m.upper[pair_index(dim, i, j)] = row[j];
            }
        }
        check_finite(&m.upper, "weight")?;
        Ok(m)
    }

    /// Copy with `c` added to every diagonal entry. Only the gauge tests use
    /// this: it shifts `log f` by the constant `D·c`.
    #[doc(hidden)]
    pub fn with_diagonal_shift(&self, c: f64) -> Self {
        Self {
            trace: self.trace + c * self.dim as f64,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// `W_ij` for `i ≠ j` (0-based).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            core::cmp::Ordering::Less => self.upper[pair_index(self.dim, i, j)],
            core::cmp::Ordering::Greater => self.upper[pair_index(self.dim, j, i)],
            core::cmp::Ordering::Equal => self.trace / self.dim as f64,
        }
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| if i == j { 0.0 } else { self.weight(i, j) }).collect())
            .collect()
    }

    /// `Σ_{j≠i} W_ij y_j` for the point `y`.
    pub fn local_field(&self, y: usize, i: usize) -> f64 {
        let mut h = 0.0;
        for j in 0..self.dim {
            if j != i {
                h += self.weight(i, j) * spin(y, j);
            }
        }
        h
    }

    /// `yᵀWy` for spins given as floats.
    pub fn energy_of_spins(&self, s: &[f64]) -> f64 {
        let mut k = 0;
        let mut e = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in i + 1..self.dim {
                row += self.upper[k] * s[j];
                k += 1;
            }
            e += s[i] * row;
        }
        2.0 * e + self.trace
    }
}

#[inline]
fn spin(y: usize, i: usize) -> f64 {
    if y >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Position of `(i, j)`, `i < j`, in the row-ordered upper triangle.
pub fn pair_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < dim);
    i * dim - i * (i + 1) / 2 + (j - i - 1)
}

impl UnnormalizedModel for BoltzmannModel {
    fn space(&self) -> SampleSpace {
        SampleSpace::hypercube(self.dim).expect("validated")
    }

    fn params(&self) -> &[f64] {
        &self.upper
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.upper
    }

    fn log_f(&self, y: usize) -> f64 {
        let mut k = 0;
        let mut e = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in i + 1..self.dim {
                row += if y >> j & 1 == 1 { self.upper[k] } else { -self.upper[k] };
                k += 1;
            }
            e += spin(y, i) * row;
        }
        2.0 * e + self.trace
    }

    fn add_grad_log_f(&self, y: usize, weight: f64, grad: &mut [f64]) {
        let mut k = 0;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                let same = (y >> i & 1) == (y >> j & 1);
                grad[k] += if same { 2.0 * weight } else { -2.0 * weight };
                k += 1;
            }
        }
    }
}

/// Saturated model with `log f_y = η_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    space: SampleSpace,
    eta: Vec<f64>,
}

impl TabularModel {
    pub fn zeros(space: SampleSpace) -> Result<Self> {
        space.ensure_enumerable()?;
        let n = space.size();
        Ok(Self { space, eta: vec![0.0; n] })
    }

    pub fn new(space: SampleSpace, eta: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(space)?;
        if eta.len() != m.eta.len() {
            return Err(Error::DimensionMismatch {
                expected: m.eta.len(),
                found: eta.len(),
            });
        }
        check_finite(&eta, "eta")?;
        m.eta = eta;
        Ok(m)
    }
}

impl UnnormalizedModel for TabularModel {
    fn space(&self) -> SampleSpace {
        self.space.clone()
    }

    fn params(&self) -> &[f64] {
        &self.eta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.eta
    }

    fn log_f(&self, y: usize) -> f64 {
        self.eta[y]
    }

    fn add_grad_log_f(&self, y: usize, weight: f64, grad: &mut [f64]) {
        grad[y] += weight;
    }
}

/// `f(y | x; θ) = exp(θ_yᵀ x)` over labels `0..L`.
///
/// `θ` is stored label-major: `θ_y` occupies `theta[y·d .. (y+1)·d]`. With
/// the gauge flag set, `θ_{L−1}` is pinned at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalModel {
    labels: usize,
    features: usize,
    theta: Vec<f64>,
    gauge: bool,
}

impl ConditionalModel {
    pub fn zeros(labels: usize, features: usize) -> Result<Self> {
        if labels < 2 {
            return Err(Error::InvalidInput("at least two labels are needed".into()));
        }
        if features == 0 {
            return Err(Error::InvalidInput("feature dimension must be positive".into()));
        }
        Ok(Self {
            labels,
            features,
            theta: vec![0.0; labels * features],
            gauge: false,
        })
    }

    pub fn new(labels: usize, features: usize, theta: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(labels, features)?;
        if theta.len() != m.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: m.theta.len(),
                found: theta.len(),
            });
        }
        check_finite(&theta, "theta")?;
        m.theta = theta;
        Ok(m)
    }

    /// Pins `θ_{L−1} = 0`, removing the shift redundancy.
    pub fn with_gauge(mut self, gauge: bool) -> Self {
        self.gauge = gauge;
        if gauge {
            let start = (self.labels - 1) * self.features;
            self.theta[start..].iter_mut().for_each(|v| *v = 0.0);
        }
        self
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn gauge(&self) -> bool {
        self.gauge
    }

    pub fn label_space(&self) -> SampleSpace {
        SampleSpace::labels(self.labels).expect("validated")
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn theta(&self, y: usize) -> &[f64] {
        &self.theta[y * self.features..(y + 1) * self.features]
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features {
            return Err(Error::DimensionMismatch {
                expected: self.features,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `θ_yᵀ x`.
    pub fn log_f(&self, x: &[f64], y: usize) -> f64 {
        self.theta(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn checked_log_f(&self, x: &[f64], y: usize) -> Result<f64> {
        self.check_input(x)?;
        self.label_space().check_point(y)?;
        Ok(self.log_f(x, y))
    }

    /// `log f(· | x)` for every label.
    pub fn log_f_all(&self, x: &[f64]) -> Vec<f64> {
        (0..self.labels).map(|y| self.log_f(x, y)).collect()
    }

    /// `grad += weight · ∂(θ_yᵀx)/∂θ`; nonzero only in block `θ_y`.
    pub fn add_grad_log_f(&self, x: &[f64], y: usize, weight: f64, grad: &mut [f64]) {
        if self.gauge && y == self.labels - 1 {
            return;
        }
        let block = &mut grad[y * self.features..(y + 1) * self.features];
        for (g, v) in block.iter_mut().zip(x) {
            *g += weight * v;
        }
    }

    pub fn grad_log_f(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.label_space().check_point(y)?;
        let mut g = vec![0.0; self.theta.len()];
        self.add_grad_log_f(x, y, 1.0, &mut g);
        Ok(g)
    }

    /// `log Z_θ(x)`, exact over the labels.
    pub fn log_z(&self, x: &[f64]) -> f64 {
        math::log_sum_exp_slice(&self.log_f_all(x))
    }

    /// `q(· | x)`.
    pub fn conditional(&self, x: &[f64]) -> Result<Probability> {
        self.check_input(x)?;
        Ok(UnnormalizedVector::from_log(self.log_f_all(x))?.normalized())
    }

    /// `argmax_y θ_yᵀx`, ties to the smallest label.
    pub fn classify(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = self.log_f(x, 0);
        for y in 1..self.labels {
            let v = self.log_f(x, y);
            if v > best_val {
                best = y;
                best_val = v;
            }
        }
        best
    }

    pub(crate) fn gauge_mask(&self, grad: &mut [f64]) {
        if self.gauge {
            let start = (self.labels - 1) * self.features;
            grad[start..].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn boltzmann_examples() {
        let zero = BoltzmannModel::zeros(3).unwrap();
        assert!((0..8).all(|y| zero.log_f(y) == 0.0));
        let m = BoltzmannModel::from_upper(2, vec![0.5]).unwrap();
        assert_eq!(m.log_f(3), 1.0);
        assert_eq!(m.log_f(1), -1.0);
        // y = (+1, −1) is index 1
        assert_eq!(m.grad_log_f(1).unwrap(), vec![-2.0]);
    }

    #[test]
    fn boltzmann_matches_quadratic_form() {
        let dim = 5;
        let m = BoltzmannModel::from_upper(dim, pseudo_random(10, 3)).unwrap();
        let w = m.matrix();
        for y in 0..1 << dim {
            let s: Vec<f64> = (0..dim).map(|i| spin(y, i)).collect();
            let mut q = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    q += s[i] * w[i][j] * s[j];
                }
            }
            assert!((m.log_f(y) - q).abs() < 1e-12);
            assert!((m.energy_of_spins(&s) - q).abs() < 1e-12);
        }
        assert_eq!(BoltzmannModel::from_matrix(&w).unwrap(), m);
    }

    #[test]
    fn boltzmann_log_z() {
        let m = BoltzmannModel::zeros(8).unwrap();
        assert!((exact_log_z(&m).unwrap() - 8.0 * math::ln(2.0)).abs() < 1e-12);
        let beta = 0.7;
        let m = BoltzmannModel::from_upper(2, vec![beta]).unwrap();
        let expect = math::ln(2.0 * math::exp(2.0 * beta) + 2.0 * math::exp(-2.0 * beta));
        assert!((exact_log_z(&m).unwrap() - expect).abs() < 1e-12);
        let p = normalize(&BoltzmannModel::zeros(3).unwrap()).unwrap();
        assert!(p.weights().iter().all(|w| (w - 0.125).abs() < 1e-15));
    }

    #[test]
    fn from_matrix_rejects_bad_input() {
        assert!(BoltzmannModel::from_matrix(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(BoltzmannModel::from_matrix(&[vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(BoltzmannModel::from_upper(3, vec![0.0; 2]).is_err());
    }

    #[test]
    fn boltzmann_gradient_finite_differences() {
        let dim = 4;
        for seed in 0..20 {
            let m = BoltzmannModel::from_upper(dim, pseudo_random(6, seed)).unwrap();
            for y in 0..16 {
                let g = m.grad_log_f(y).unwrap();
                for k in 0..6 {
                    let h = 1e-6;
                    let mut up = m.clone();
                    up.params_mut()[k] += h;
                    let mut dn = m.clone();
                    dn.params_mut()[k] -= h;
                    let fd = (up.log_f(y) - dn.log_f(y)) / (2.0 * h);
                    assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()));
                }
            }
        }
    }

    #[test]
    fn diagonal_shift_is_constant() {
        let m = BoltzmannModel::from_upper(3, pseudo_random(3, 1)).unwrap();
        let s = m.with_diagonal_shift(0.4);
        for y in 0..8 {
            assert!((s.log_f(y) - m.log_f(y) - 1.2).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_consistency() {
        let m = BoltzmannModel::from_upper(4, pseudo_random(6, 8)).unwrap();
        let p = normalize(&m).unwrap();
        let lz = exact_log_z(&m).unwrap();
        let sum: f64 = p.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for y in 0..16 {
            assert!((math::ln(p.weights()[y]) - (m.log_f(y) - lz)).abs() < 1e-12);
        }
    }

    #[test]
    fn tabular_examples() {
        let t = TabularModel::new(SampleSpace::labels(2).unwrap(), vec![0.0, math::ln(3.0)]).unwrap();
        let p = normalize(&t).unwrap();
        assert!((p.weights()[0] - 0.25).abs() < 1e-15);
        assert_eq!(t.grad_log_f(1).unwrap(), vec![0.0, 1.0]);
        assert!(t.checked_log_f(2).is_err());
    }

    #[test]
    fn conditional_examples() {
        let m = ConditionalModel::zeros(10, 3).unwrap();
        let x = [1.0, 2.0, 3.0];
        assert!((0..10).all(|y| m.log_f(&x, y) == 0.0));
        assert_eq!(m.classify(&x), 0);
        assert!((m.log_z(&x) - math::ln(10.0)).abs() < 1e-14);

        let mut theta = vec![0.0; 30];
        theta[3..6].copy_from_slice(&x);
        let m = ConditionalModel::new(10, 3, theta).unwrap();
        assert_eq!(m.classify(&x), 1);
        let g = m.grad_log_f(&x, 4).unwrap();
        assert!(g.iter().enumerate().all(|(k, &v)| (v != 0.0) == (12..15).contains(&k)));
        assert!(m.checked_log_f(&[1.0], 0).is_err());
    }

    #[test]
    fn gauge_pins_last_label() {
        let m = ConditionalModel::new(3, 2, vec![1.0; 6]).unwrap().with_gauge(true);
        assert_eq!(m.theta(2), &[0.0, 0.0]);
        assert!(m.grad_log_f(&[1.0, 1.0], 2).unwrap().iter().all(|&v| v == 0.0));
    }
}
