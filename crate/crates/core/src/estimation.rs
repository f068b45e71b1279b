//! Empirical score minimization, maximum likelihood for enumerable and
//! conditional models, and evaluation metrics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::density::{FnDensity, Probability};
use crate::error::{Error, Result};
use crate::math;
use crate::models::{exact_log_z, normalize, ConditionalModel, UnnormalizedModel};
use crate::score::{LogGradient, ScoringRule};

/// Spaces at most this large are scored against a dense `log f` table.
const DENSE_TABLE_LIMIT: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stopping tolerance on the infinity norm of the gradient.
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    /// Cap on the infinity norm of a single update. Bounded scores such as
    /// ratio matching are not convex, and long early steps can settle in a
    /// poor basin. `f64::INFINITY` disables the cap.
    pub max_step: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// Adds `λ/2 ‖θ‖²` to the objective.
    pub l2_penalty: f64,
    /// Reduce per-sample terms in sample order. The core library is always
    /// sequential, so this only records intent for callers that fan out.
    pub deterministic_reduction: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10000,
            gradient_tolerance: 1e-6,
            initial_step: 1.0,
            max_step: 0.1,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            l2_penalty: 0.0,
            deterministic_reduction: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("invalid fit config: {what}")));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient_tolerance must be positive");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial_step must be positive");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return bad("l2_penalty must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub objective: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult<M> {
    pub model: M,
    pub final_objective: f64,
    pub gradient_norm: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

/// A differentiable objective over a flat parameter vector.
pub trait Objective {
    fn param_count(&self) -> usize;
    /// Objective at `params`; fills `grad` (same length) when given.
    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<f64>;
    /// Zeroes gradient entries of pinned parameters.
    fn project(&self, _grad: &mut [f64]) {}
}

/// Sample points aggregated into distinct values with weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    points: Vec<usize>,
    weights: Vec<f64>,
    /// Index of the first raw sample equal to each point.
    first_index: Vec<usize>,
}

impl WeightedPoints {
    pub fn from_samples(samples: &[usize]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("sample list is empty".into()));
        }
        let mut agg: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (i, &y) in samples.iter().enumerate() {
            agg.entry(y).or_insert((0, i)).0 += 1;
        }
        let n = samples.len() as f64;
        let mut out = Self {
            points: Vec::with_capacity(agg.len()),
            weights: Vec::with_capacity(agg.len()),
            first_index: Vec::with_capacity(agg.len()),
        };
        for (y, (count, first)) in agg {
            out.points.push(y);
            out.weights.push(count as f64 / n);
            out.first_index.push(first);
        }
        Ok(out)
    }

    /// Every point of an enumerable space weighted by `p`.
    pub fn from_distribution(p: &Probability) -> Self {
        Self {
            points: (0..p.len()).collect(),
            weights: p.weights().to_vec(),
            first_index: (0..p.len()).collect(),
        }
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_compatible(rule: &ScoringRule, space: &crate::space::SampleSpace) -> Result<()> {
    let rs = rule.locality().space();
    if rs.size() != space.size() || rs.hypercube_dim() != space.hypercube_dim() {
        return Err(Error::InvalidInput(format!(
            "score neighborhood on '{rs}' does not match the model space '{space}'"
        )));
    }
    Ok(())
}

/// `Σ_i w_i S(y_i, f_θ)` for an unconditional model.
pub struct ScoreObjective<'a, M> {
    rule: &'a ScoringRule,
    template: M,
    data: WeightedPoints,
}

impl<'a, M: UnnormalizedModel + Clone> ScoreObjective<'a, M> {
    pub fn new(rule: &'a ScoringRule, template: M, data: WeightedPoints) -> Result<Self> {
        let space = template.space();
        check_compatible(rule, &space)?;
        for &y in &data.points {
            space.check_point(y)?;
        }
        Ok(Self { rule, template, data })
    }

    fn model_at(&self, params: &[f64]) -> M {
        let mut m = self.template.clone();
        m.params_mut().copy_from_slice(params);
        m
    }
}

impl<M: UnnormalizedModel + Clone> Objective for ScoreObjective<'_, M> {
    fn param_count(&self) -> usize {
        self.template.param_count()
    }

    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let model = self.model_at(params);
        let size = model.space().size();
        let dense = size <= DENSE_TABLE_LIMIT;
        let table = if dense { model.log_table()? } else { Vec::new() };
        let want_grad = grad.is_some();
        let mut acc_dense = if want_grad && dense { vec![0.0; size] } else { Vec::new() };
        let mut acc_sparse: BTreeMap<usize, f64> = BTreeMap::new();
        let mut buf = LogGradient::new();
        let mut total = 0.0;
        let lazy = FnDensity(|z: usize| model.log_f(z));
        for ((&y, &w), &first) in self.data.points.iter().zip(&self.data.weights).zip(&self.data.first_index) {
            buf.clear();
            let g = if want_grad { Some(&mut buf) } else { None };
            let s = if dense {
                self.rule.evaluate(y, &table, g)?
            } else {
                self.rule.evaluate(y, &lazy, g)?
            };
            if !s.is_finite() {
                return Err(Error::NonFiniteObjective {
                    sample: first,
                    iteration: 0,
                });
            }
            total += w * s;
            for &(z, v) in &buf {
                if dense {
                    acc_dense[z] += w * v;
                } else {
                    *acc_sparse.entry(z).or_insert(0.0) += w * v;
                }
            }
        }
        if let Some(grad) = grad {
            grad.iter_mut().for_each(|g| *g = 0.0);
            if dense {
                for (z, &v) in acc_dense.iter().enumerate() {
                    if v != 0.0 {
                        model.add_grad_log_f(z, v, grad);
                    }
                }
            } else {
                for (&z, &v) in &acc_sparse {
                    model.add_grad_log_f(z, v, grad);
                }
            }
        }
        Ok(total)
    }
}

/// Mean negative log-likelihood `log Z_θ − Σ_i w_i log f_θ(y_i)`.
pub struct LikelihoodObjective<M> {
    template: M,
    data: WeightedPoints,
}

impl<M: UnnormalizedModel + Clone> LikelihoodObjective<M> {
    pub fn new(template: M, data: WeightedPoints) -> Result<Self> {
        let space = template.space();
        space.ensure_enumerable()?;
        for &y in &data.points {
            space.check_point(y)?;
        }
        Ok(Self { template, data })
    }
}

impl<M: UnnormalizedModel + Clone> Objective for LikelihoodObjective<M> {
    fn param_count(&self) -> usize {
        self.template.param_count()
    }

    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let mut model = self.template.clone();
        model.params_mut().copy_from_slice(params);
        let table = model.log_table()?;
        let log_z = math::log_sum_exp_slice(&table);
        let mut total = log_z;
        for (&y, &w) in self.data.points.iter().zip(&self.data.weights) {
            total -= w * table[y];
        }
        if let Some(grad) = grad {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (z, &u) in table.iter().enumerate() {
                model.add_grad_log_f(z, math::exp(u - log_z), grad);
            }
            for (&y, &w) in self.data.points.iter().zip(&self.data.weights) {
                model.add_grad_log_f(y, -w, grad);
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFiniteObjective {
                sample: self.data.first_index.first().copied().unwrap_or(0),
                iteration: 0,
            });
        }
        Ok(total)
    }
}

/// Features paired with labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    features: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl LabeledData {
    pub fn new(features: usize, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let mut x = Vec::with_capacity(rows.len() * features);
        for row in &rows {
            if row.len() != features {
                return Err(Error::DimensionMismatch {
                    expected: features,
                    found: row.len(),
                });
            }
            x.extend_from_slice(row);
        }
        Ok(Self { features, x, y: labels })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }

    pub fn y(&self, i: usize) -> usize {
        self.y[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut x = Vec::with_capacity(rows.len() * self.features);
        for &i in rows {
            x.extend_from_slice(self.x(i));
        }
        Self {
            features: self.features,
            x,
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    fn check_against(&self, model: &ConditionalModel) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidInput("sample list is empty".into()));
        }
        if self.features != model.features() {
            return Err(Error::DimensionMismatch {
                expected: model.features(),
                found: self.features,
            });
        }
        if let Some(i) = self.y.iter().position(|&y| y >= model.labels()) {
            return Err(Error::PointOutOfRange {
                point: self.y[i],
                size: model.labels(),
            });
        }
        Ok(())
    }
}

/// `(1/n) Σ_i S(y_i, f(· | x_i; θ))`, or the conditional log-likelihood
/// when no rule is given.
pub struct ConditionalObjective<'a> {
    rule: Option<&'a ScoringRule>,
    template: ConditionalModel,
    data: &'a LabeledData,
}

impl<'a> ConditionalObjective<'a> {
    pub fn new(rule: Option<&'a ScoringRule>, template: ConditionalModel, data: &'a LabeledData) -> Result<Self> {
        data.check_against(&template)?;
        if let Some(rule) = rule {
            check_compatible(rule, &template.label_space())?;
        }
        Ok(Self { rule, template, data })
    }
}

impl Objective for ConditionalObjective<'_> {
    fn param_count(&self) -> usize {
        self.template.params().len()
    }

    fn evaluate(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> Result<f64> {
        let mut model = self.template.clone();
        model.params_mut().copy_from_slice(params);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let w = 1.0 / self.data.len() as f64;
        let mut buf = LogGradient::new();
        let mut total = 0.0;
        for i in 0..self.data.len() {
            let x = self.data.x(i);
            let y = self.data.y(i);
            let u = model.log_f_all(x);
            let s = match self.rule {
                Some(rule) => {
                    buf.clear();
                    let g = if grad.is_some() { Some(&mut buf) } else { None };
                    rule.evaluate(y, &u, g)?
                }
                None => {
                    let lz = math::log_sum_exp_slice(&u);
                    if grad.is_some() {
                        buf.clear();
                        buf.extend(u.iter().enumerate().map(|(z, &v)| (z, math::exp(v - lz))));
                        buf.push((y, -1.0));
                    }
                    lz - u[y]
                }
            };
            if !s.is_finite() {
                return Err(Error::NonFiniteObjective { sample: i, iteration: 0 });
            }
            total += w * s;
            if let Some(g) = grad.as_deref_mut() {
                for &(z, v) in &buf {
                    model.add_grad_log_f(x, z, w * v, g);
                }
            }
        }
        Ok(total)
    }

    fn project(&self, grad: &mut [f64]) {
        self.template.gauge_mask(grad);
    }
}

fn penalized<O: Objective + ?Sized>(obj: &O, lambda: f64, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
    let want = grad.is_some();
    let mut grad = grad;
    let mut v = obj.evaluate(x, grad.as_deref_mut())?;
    if lambda > 0.0 {
        v += 0.5 * lambda * x.iter().map(|a| a * a).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += lambda * xi;
            }
        }
    }
    if want {
        obj.project(grad.unwrap());
    }
    Ok(v)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(math::abs(*a)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `obj` from `x0` by gradient descent with Armijo backtracking.
/// Trial steps after the first iteration use the Barzilai–Borwein length.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: Vec<f64>, config: &FitConfig) -> Result<(Vec<f64>, FitStats)> {
    config.validate()?;
    let n = obj.param_count();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    let lambda = config.l2_penalty;
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = penalized(obj, lambda, &x, Some(&mut g))?;
    let mut trace = vec![TraceEntry {
        objective: f,
        gradient_norm: inf_norm(&g),
    }];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= config.gradient_tolerance;
    let min_step = config.initial_step * 1e-20;
    while !converged && iterations < config.max_iterations {
        let g2 = dot(&g, &g);
        let mut t = match &prev {
            Some((s, yv)) => {
                let sy = dot(s, yv);
                let ss = dot(s, s);
                if sy > 0.0 && ss > 0.0 {
                    (ss / sy).clamp(config.initial_step * 1e-8, config.initial_step * 1e6)
                } else {
                    config.initial_step
                }
            }
            None => config.initial_step,
        };
        let gmax = inf_norm(&g);
        if gmax > 0.0 {
            t = t.min(config.max_step / gmax);
        }
        let mut last_err = None;
        let accepted = loop {
            for i in 0..n {
                x_new[i] = x[i] - t * g[i];
            }
            match penalized(obj, lambda, &x_new, Some(&mut g_new)) {
                Ok(v) if v.is_finite() && v <= f - config.armijo_c * t * g2 => break Some(v),
                Ok(_) => {}
                Err(Error::NonFiniteObjective { sample, .. }) => {
                    last_err = Some(Error::NonFiniteObjective { sample, iteration: iterations });
                }
                Err(e) => return Err(e),
            }
            t *= config.backtrack_factor;
            if t < min_step {
                break None;
            }
        };
        let Some(f_new) = accepted else {
            // no sufficient decrease representable at this precision
            if let Some(e) = last_err {
                return Err(e);
            }
            break;
        };
        iterations += 1;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        prev = Some((s, yv));
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut g, &mut g_new);
        f = f_new;
        let gn = inf_norm(&g);
        trace.push(TraceEntry {
            objective: f,
            gradient_norm: gn,
        });
        converged = gn <= config.gradient_tolerance;
    }
    let stats = FitStats {
        final_objective: f,
        gradient_norm: inf_norm(&g),
        iterations_used: iterations,
        converged,
        trace,
    };
    Ok((x, stats))
}

#[derive(Debug, Clone)]
pub struct FitStats {
    pub final_objective: f64,
    pub gradient_norm: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl FitStats {
    fn into_result<M>(self, model: M) -> FitResult<M> {
        FitResult {
            model,
            final_objective: self.final_objective,
            gradient_norm: self.gradient_norm,
            iterations_used: self.iterations_used,
            converged: self.converged,
            trace: self.trace,
        }
    }
}

/// `(1/n) Σ_i S(y_i, f_θ)`.
pub fn empirical_score<M: UnnormalizedModel + Clone>(rule: &ScoringRule, model: &M, samples: &[usize]) -> Result<f64> {
    let obj = ScoreObjective::new(rule, model.clone(), WeightedPoints::from_samples(samples)?)?;
    obj.evaluate(model.params(), None)
}

/// Parameter gradient of the empirical score.
pub fn empirical_score_gradient<M: UnnormalizedModel + Clone>(
    rule: &ScoringRule,
    model: &M,
    data: WeightedPoints,
) -> Result<(f64, Vec<f64>)> {
    let obj = ScoreObjective::new(rule, model.clone(), data)?;
    let mut g = vec![0.0; model.param_count()];
    let v = obj.evaluate(model.params(), Some(&mut g))?;
    Ok((v, g))
}

fn fit_with<M: UnnormalizedModel + Clone, O: Objective>(obj: &O, init: &M, config: &FitConfig) -> Result<FitResult<M>> {
    let (x, stats) = minimize(obj, init.params().to_vec(), config)?;
    let mut model = init.clone();
    model.params_mut().copy_from_slice(&x);
    Ok(stats.into_result(model))
}

/// Minimizes the empirical score starting from `init`.
pub fn fit<M: UnnormalizedModel + Clone>(
    rule: &ScoringRule,
    init: &M,
    samples: &[usize],
    config: &FitConfig,
) -> Result<FitResult<M>> {
    let obj = ScoreObjective::new(rule, init.clone(), WeightedPoints::from_samples(samples)?)?;
    fit_with(&obj, init, config)
}

/// Maximum likelihood with the exact partition function.
pub fn mle_fit<M: UnnormalizedModel + Clone>(init: &M, samples: &[usize], config: &FitConfig) -> Result<FitResult<M>> {
    let obj = LikelihoodObjective::new(init.clone(), WeightedPoints::from_samples(samples)?)?;
    fit_with(&obj, init, config)
}

/// `(1/n) Σ_i S(y_i, f(· | x_i))`.
pub fn empirical_conditional_score(rule: &ScoringRule, model: &ConditionalModel, data: &LabeledData) -> Result<f64> {
    ConditionalObjective::new(Some(rule), model.clone(), data)?.evaluate(model.params(), None)
}

/// Conditional fit by a local score (`Some`) or by maximum likelihood (`None`).
pub fn fit_conditional(
    rule: Option<&ScoringRule>,
    init: &ConditionalModel,
    data: &LabeledData,
    config: &FitConfig,
) -> Result<FitResult<ConditionalModel>> {
    let obj = ConditionalObjective::new(rule, init.clone(), data)?;
    let (x, stats) = minimize(&obj, init.params().to_vec(), config)?;
    let mut model = init.clone();
    model.params_mut().copy_from_slice(&x);
    Ok(stats.into_result(model))
}

/// `(1/N) Σ_t (log Z − log f(ỹ_t))`.
pub fn negative_log_loss<M: UnnormalizedModel + ?Sized>(model: &M, test: &[usize], log_z: f64) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidInput("test sample list is empty".into()));
    }
    let space = model.space();
    let mut total = 0.0;
    for &y in test {
        space.check_point(y)?;
        total += log_z - model.log_f(y);
    }
    Ok(total / test.len() as f64)
}

/// Negative log-loss with the exact partition function.
pub fn exact_negative_log_loss<M: UnnormalizedModel + ?Sized>(model: &M, test: &[usize]) -> Result<f64> {
    negative_log_loss(model, test, exact_log_z(model)?)
}

/// `−Σ_y p_y log q_θ(y)`; equals the entropy of `p` when `q_θ = p`.
pub fn expected_negative_log_loss<M: UnnormalizedModel + ?Sized>(model: &M, p: &Probability) -> Result<f64> {
    let q = normalize(model)?;
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: q.len(), found: p.len() });
    }
    Ok(-p.weights().iter().zip(q.weights()).map(|(a, b)| a * math::ln(*b)).sum::<f64>())
}

/// `(1/N) Σ_t −log q(y_t | x_t)` with `Z_θ(x)` computed over all labels.
pub fn conditional_negative_log_loss(model: &ConditionalModel, data: &LabeledData) -> Result<f64> {
    data.check_against(model)?;
    let mut total = 0.0;
    for i in 0..data.len() {
        let x = data.x(i);
        total += model.log_z(x) - model.log_f(x, data.y(i));
    }
    Ok(total / data.len() as f64)
}

/// Fraction of rows whose predicted label differs from the given one.
pub fn test_error(model: &ConditionalModel, data: &LabeledData) -> Result<f64> {
    data.check_against(model)?;
    let wrong = (0..data.len()).filter(|&i| model.classify(data.x(i)) != data.y(i)).count();
    Ok(wrong as f64 / data.len() as f64)
}
