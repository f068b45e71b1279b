//! Seeded random generation: exact inverse-CDF sampling, systematic-scan
//! Gibbs for Boltzmann machines, and annealed importance sampling.
//!
//! Every stream is ChaCha8 keyed by `seed` with the stream id selecting the
//! ChaCha stream, so output is identical across platforms.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::density::Probability;
use crate::error::{Error, Result};
use crate::math;
use crate::models::{BoltzmannModel, UnnormalizedModel};

/// Deterministic random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `n` i.i.d. draws from `p` by inverse CDF.
pub fn exact_sample(p: &Probability, n: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &w in p.weights() {
        acc += w;
        cdf.push(acc);
    }
    let last = p.len() - 1;
    (0..n)
        .map(|_| {
            let u = rng.uniform() * acc;
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

/// One systematic-scan sweep over coordinates `1..D` at inverse temperature
/// `beta`. `P(y_i = +1 | rest) = σ(4β Σ_{j≠i} W_ij y_j)`.
pub fn gibbs_sweep(model: &BoltzmannModel, beta: f64, spins: &mut [f64], rng: &mut RngStream) {
    let dim = model.dim();
    for i in 0..dim {
        let mut h = 0.0;
        for (j, s) in spins.iter().enumerate() {
            if j != i {
                h += model.weight(i, j) * s;
            }
        }
        let p = math::sigmoid(4.0 * beta * h);
        spins[i] = if rng.uniform() < p { 1.0 } else { -1.0 };
    }
}

fn spins_to_index(spins: &[f64]) -> usize {
    spins
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .fold(0, |acc, (i, _)| acc | 1 << i)
}

fn random_spins(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..dim).map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 }).collect()
}

/// Default burn-in: `100·D` sweeps.
pub fn default_burn_in(dim: usize) -> usize {
    100 * dim
}

/// `n` states from a single Gibbs chain started uniformly at random,
/// keeping every `thinning`-th sweep after `burn_in` sweeps.
pub fn gibbs_sample(
    model: &BoltzmannModel,
    n: usize,
    burn_in: usize,
    thinning: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if thinning == 0 {
        return Err(Error::InvalidInput("thinning must be at least 1".into()));
    }
    let mut spins = random_spins(model.dim(), rng);
    for _ in 0..burn_in {
        gibbs_sweep(model, 1.0, &mut spins, rng);
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        for _ in 0..thinning {
            gibbs_sweep(model, 1.0, &mut spins, rng);
        }
        out.push(spins_to_index(&spins));
    }
    Ok(out)
}

/// Exact single-site transition matrix of one systematic sweep,
/// `T[a][b] = P(b | a)`. Enumerates `{±1}^D`; meant for small `D`.
pub fn gibbs_sweep_kernel(model: &BoltzmannModel) -> Result<Vec<Vec<f64>>> {
    let space = model.space();
    space.ensure_enumerable()?;
    let n = space.size();
    let mut kernel = vec![vec![0.0; n]; n];
    for (a, row) in kernel.iter_mut().enumerate() {
        let mut dist = vec![0.0; n];
        dist[a] = 1.0;
        for i in 0..model.dim() {
            let mut next = vec![0.0; n];
            for (y, &mass) in dist.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let p = math::sigmoid(4.0 * model.local_field(y, i));
                next[y | 1 << i] += mass * p;
                next[y & !(1 << i)] += mass * (1.0 - p);
            }
            dist = next;
        }
        *row = dist;
    }
    Ok(kernel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AisConfig {
    pub num_temperatures: usize,
    pub num_chains: usize,
    pub sweeps_per_temperature: usize,
}

impl Default for AisConfig {
    fn default() -> Self {
        Self {
            num_temperatures: 1000,
            num_chains: 100,
            sweeps_per_temperature: 1,
        }
    }
}

impl AisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_temperatures < 2 {
            return Err(Error::InvalidInput("AIS needs at least 2 temperatures".into()));
        }
        if self.num_chains == 0 || self.sweeps_per_temperature == 0 {
            return Err(Error::InvalidInput("AIS chains and sweeps must be positive".into()));
        }
        Ok(())
    }

    /// Linear schedule `β_k = k / (K − 1)`.
    pub fn beta(&self, k: usize) -> f64 {
        k as f64 / (self.num_temperatures - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub log_weights: Vec<f64>,
}

/// Log importance weight of one AIS chain from the uniform base at `β = 0`
/// to `f_W` at `β = 1`. Chain `c` draws from stream `(seed, c)`.
pub fn ais_chain(model: &BoltzmannModel, config: &AisConfig, seed: u64, chain: u64) -> f64 {
    let mut rng = RngStream::new(seed, chain);
    let mut spins = random_spins(model.dim(), &mut rng);
    let mut log_w = 0.0;
    for k in 1..config.num_temperatures {
        log_w += (config.beta(k) - config.beta(k - 1)) * model.energy_of_spins(&spins);
        for _ in 0..config.sweeps_per_temperature {
            gibbs_sweep(model, config.beta(k), &mut spins, &mut rng);
        }
    }
    log_w
}

/// `D ln 2 + log mean exp(w)` with a delta-method standard error.
pub fn ais_combine(dim: usize, log_weights: Vec<f64>) -> AisEstimate {
    let m = log_weights.len() as f64;
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_weights.iter().map(|w| math::exp(w - max)).collect();
    let mean = scaled.iter().sum::<f64>() / m;
    let var = if log_weights.len() > 1 {
        scaled.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    AisEstimate {
        estimate: dim as f64 * core::f64::consts::LN_2 + max + math::ln(mean),
        std_error: math::sqrt(var / m) / mean,
        log_weights,
    }
}

/// Annealed importance sampling estimate of `log Z_W`.
pub fn ais_log_z(model: &BoltzmannModel, config: &AisConfig, seed: u64) -> Result<AisEstimate> {
    config.validate()?;
    let weights = (0..config.num_chains as u64)
        .map(|c| ais_chain(model, config, seed, c))
        .collect();
    Ok(ais_combine(model.dim(), weights))
}

/// `W = (W̃ + W̃ᵀ)/2` with `W̃_ij ~ N(0, scale²)`, diagonal dropped.
pub fn random_boltzmann(dim: usize, scale: f64, rng: &mut RngStream) -> Result<BoltzmannModel> {
    let mut model = BoltzmannModel::zeros(dim)?;
    for w in model.params_mut() {
        *w = scale * 0.5 * (rng.normal() + rng.normal());
    }
    Ok(model)
}
