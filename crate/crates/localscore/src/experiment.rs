//! Repeated estimation experiments: Boltzmann machines on synthetic data
//! and conditional label models on the digits data. Repetitions fan out
//! over threads; each owns its random streams, and results are merged in
//! repetition order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use localscore_core::estimation::{
    conditional_negative_log_loss, exact_negative_log_loss, fit, fit_conditional, mle_fit, negative_log_loss,
    test_error, FitConfig, LabeledData,
};
use localscore_core::graph::label_band_graph;
use localscore_core::models::normalize;
use localscore_core::sampling::{
    ais_log_z, default_burn_in, exact_sample, gibbs_sample, random_boltzmann, AisConfig, RngStream,
};
use localscore_core::space::SpaceKind;
use localscore_core::{
    BoltzmannModel, ConditionalModel, Locality, NeighborhoodGraph, SampleSpace, ScoreSpec, ScoringRule, UnnormalizedModel,
};

use crate::error::{CliError, Result};
use crate::optdigits::{inject_label_noise, split, Digits, LABELS};
use crate::stats::{summarize, Summary};

/// `mle`, or a score spec with a neighborhood size: `pl@2` is the
/// pseudo-likelihood on the radius-2 Hamming ball (or label band 2).
/// Block specs such as `mcl:1;2` carry their own neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Mle,
    Score { spec: ScoreSpec, k: usize },
}

impl FromStr for Estimator {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mle") {
            return Ok(Estimator::Mle);
        }
        let (spec, k) = match s.rsplit_once('@') {
            Some((spec, k)) => {
                let k = k.parse().map_err(|_| CliError::Usage(format!("bad neighborhood size in '{s}'")))?;
                (spec, k)
            }
            None => (s, 1),
        };
        Ok(Estimator::Score {
            spec: ScoreSpec::parse(spec)?,
            k,
        })
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Mle => f.write_str("mle"),
            Estimator::Score { spec: spec @ (ScoreSpec::Cl(Some(_)) | ScoreSpec::Mcl(Some(_))), .. } => write!(f, "{spec}"),
            Estimator::Score { spec, k } => write!(f, "{spec}@{k}"),
        }
    }
}

impl Estimator {
    /// Rule on `{±1}^dim` with the Hamming ball of radius `k`.
    pub fn hypercube_rule(&self, dim: usize) -> Result<Option<ScoringRule>> {
        match self {
            Estimator::Mle => Ok(None),
            Estimator::Score { spec, k } => Ok(Some(spec.build(Locality::hamming(dim, *k)?)?)),
        }
    }

    /// Rule on an arbitrary space: an explicit graph if given, else the
    /// Hamming ball (hypercube) or the label band (labels).
    pub fn rule_on(&self, space: &SampleSpace, graph: Option<&NeighborhoodGraph>) -> Result<Option<ScoringRule>> {
        let Estimator::Score { spec, k } = self else {
            return Ok(None);
        };
        let locality = match (graph, space.kind()) {
            (Some(g), _) => {
                if g.space() != space {
                    return Err(CliError::Usage("graph file and space disagree".into()));
                }
                Locality::graph(g.clone())
            }
            (None, SpaceKind::Hypercube { dim }) => Locality::hamming(*dim, *k)?,
            (None, SpaceKind::LabelRange { labels }) => Locality::graph(label_band_graph(*labels, *k)?),
            (None, SpaceKind::Enumerated(_)) => {
                return Err(CliError::Usage(format!("estimator '{self}' on an enumerated space needs a graph file")))
            }
        };
        Ok(Some(spec.build(locality)?))
    }

    /// Rule on labels `0..labels` with the band `|y − z| ≤ k`.
    pub fn label_rule(&self, labels: usize) -> Result<Option<ScoringRule>> {
        match self {
            Estimator::Mle => Ok(None),
            Estimator::Score { spec, k } => Ok(Some(spec.build(Locality::graph(label_band_graph(labels, *k)?))?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Exact,
    Gibbs { burn_in: Option<usize>, thinning: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogZMethod {
    Exact,
    Ais(AisConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannExperiment {
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of the entries of `W̃` in `W = (W̃ + W̃ᵀ)/2`.
    pub weight_scale: f64,
    pub estimators: Vec<Estimator>,
    pub sampler: Sampler,
    pub log_z: LogZMethod,
    pub fit: FitConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub estimator: String,
    pub test_loss: f64,
    /// Classification error; absent for density estimation.
    pub test_error: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
    /// Set when the fit failed; the loss is then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub index: usize,
    /// Test loss of the generating model (Boltzmann) or `ln L` baseline.
    pub reference_loss: f64,
    pub outcomes: Vec<Outcome>,
}

fn streams(seed: u64, rep: usize) -> [RngStream; 4] {
    let base = 4 * rep as u64;
    [0, 1, 2, 3].map(|k| RngStream::new(seed, base + k))
}

fn draw(model: &BoltzmannModel, n: usize, sampler: Sampler, rng: &mut RngStream) -> Result<Vec<usize>> {
    Ok(match sampler {
        Sampler::Exact => exact_sample(&normalize(model)?, n, rng),
        Sampler::Gibbs { burn_in, thinning } => {
            gibbs_sample(model, n, burn_in.unwrap_or_else(|| default_burn_in(model.dim())), thinning, rng)?
        }
    })
}

fn failed(estimator: String, e: impl fmt::Display) -> Outcome {
    Outcome {
        estimator,
        test_loss: f64::NAN,
        test_error: None,
        converged: false,
        iterations: 0,
        final_objective: f64::NAN,
        error: Some(e.to_string()),
    }
}

impl BoltzmannExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(CliError::Usage("n_train and n_test must be positive".into()));
        }
        if self.estimators.is_empty() {
            return Err(CliError::Usage("no estimators given".into()));
        }
        for e in &self.estimators {
            e.hypercube_rule(self.dim)?;
        }
        if let LogZMethod::Ais(cfg) = self.log_z {
            cfg.validate()?;
        }
        self.fit.validate()?;
        Ok(())
    }

    fn log_z(&self, model: &BoltzmannModel, rep: usize) -> Result<f64> {
        Ok(match self.log_z {
            LogZMethod::Exact => localscore_core::models::exact_log_z(model)?,
            LogZMethod::Ais(cfg) => ais_log_z(model, &cfg, self.seed.wrapping_add(1 + rep as u64))?.estimate,
        })
    }

    /// Runs one repetition: a fresh `W`, fresh data, every estimator.
    pub fn run_repetition(&self, rep: usize) -> Result<Repetition> {
        let [mut w_rng, mut train_rng, mut test_rng, _] = streams(self.seed, rep);
        let truth = random_boltzmann(self.dim, self.weight_scale, &mut w_rng)?;
        let train = draw(&truth, self.n_train, self.sampler, &mut train_rng)?;
        let test = draw(&truth, self.n_test, self.sampler, &mut test_rng)?;
        let reference_loss = negative_log_loss(&truth, &test, self.log_z(&truth, rep)?)?;
        let init = BoltzmannModel::zeros(self.dim)?;
        let mut outcomes = Vec::with_capacity(self.estimators.len());
        for est in &self.estimators {
            let label = est.to_string();
            let result = match est.hypercube_rule(self.dim)? {
                None => mle_fit(&init, &train, &self.fit),
                Some(rule) => fit(&rule, &init, &train, &self.fit),
            };
            let outcome = match result {
                Ok(r) => {
                    let loss = match self.log_z {
                        LogZMethod::Exact => exact_negative_log_loss(&r.model, &test)?,
                        LogZMethod::Ais(_) => negative_log_loss(&r.model, &test, self.log_z(&r.model, rep)?)?,
                    };
                    Outcome {
                        estimator: label,
                        test_loss: loss,
                        test_error: None,
                        converged: r.converged,
                        iterations: r.iterations_used,
                        final_objective: r.final_objective,
                        error: None,
                    }
                }
                Err(e) => failed(label, e),
            };
            outcomes.push(outcome);
        }
        Ok(Repetition {
            index: rep,
            reference_loss,
            outcomes,
        })
    }
}

/// Runs `reps` repetitions over up to `threads` workers (0 means all
/// available cores) and returns them in repetition order.
pub fn fan_out<F>(reps: usize, threads: usize, job: F) -> Result<Vec<Repetition>>
where
    F: Fn(usize) -> Result<Repetition> + Sync,
{
    let threads = match threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(reps.max(1));
    let mut slots: Vec<Option<Result<Repetition>>> = (0..reps).map(|_| None).collect();
    std::thread::scope(|scope| {
        let job = &job;
        let chunks: Vec<_> = (0..threads)
            .map(|t| scope.spawn(move || (t..reps).step_by(threads).map(|r| (r, job(r))).collect::<Vec<_>>()))
            .collect();
        for handle in chunks {
            for (r, out) in handle.join().expect("worker panicked") {
                slots[r] = Some(out);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every repetition ran")).collect()
}

/// Per-estimator summaries of the test loss (and error, when present), in
/// first-seen estimator order.
pub fn aggregate(reps: &[Repetition]) -> Vec<(String, Option<Summary>, Option<Summary>)> {
    let mut order = Vec::new();
    let mut losses: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rep in reps {
        for o in &rep.outcomes {
            if !losses.contains_key(&o.estimator) {
                order.push(o.estimator.clone());
            }
            losses.entry(o.estimator.clone()).or_default().push(o.test_loss);
            if let Some(e) = o.test_error {
                errors.entry(o.estimator.clone()).or_default().push(e);
            }
        }
    }
    order
        .into_iter()
        .map(|name| {
            let l = summarize(&losses[&name]);
            let e = errors.get(&name).and_then(|v| summarize(v));
            (name, l, e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationExperiment {
    pub n_train: usize,
    pub noise: f64,
    pub estimators: Vec<Estimator>,
    pub fit: FitConfig,
    pub seed: u64,
}

impl ClassificationExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(CliError::Usage("no estimators given".into()));
        }
        for e in &self.estimators {
            e.label_rule(LABELS)?;
        }
        self.fit.validate()?;
        Ok(())
    }

    /// Noise injection, a random split, and every estimator on the split.
    pub fn run_split(&self, data: &Digits, rep: usize) -> Result<Repetition> {
        let [mut noise_rng, mut split_rng, _, _] = streams(self.seed, rep);
        let mut labels = data.labels.clone();
        inject_label_noise(&mut labels, self.noise, LABELS, &mut noise_rng)?;
        let all = LabeledData::new(data.feature_count(), data.features.clone(), labels)?;
        let (train_rows, test_rows) = split(all.len(), self.n_train, &mut split_rng)?;
        let train = all.subset(&train_rows);
        let test = all.subset(&test_rows);
        let init = ConditionalModel::zeros(LABELS, all.features())?;
        let mut outcomes = Vec::with_capacity(self.estimators.len());
        for est in &self.estimators {
            let label = est.to_string();
            let rule = est.label_rule(LABELS)?;
            let outcome = match fit_conditional(rule.as_ref(), &init, &train, &self.fit) {
                Ok(r) => Outcome {
                    estimator: label,
                    test_loss: conditional_negative_log_loss(&r.model, &test)?,
                    test_error: Some(test_error(&r.model, &test)?),
                    converged: r.converged,
                    iterations: r.iterations_used,
                    final_objective: r.final_objective,
                    error: None,
                },
                Err(e) => failed(label, e),
            };
            outcomes.push(outcome);
        }
        Ok(Repetition {
            index: rep,
            reference_loss: (LABELS as f64).ln(),
            outcomes,
        })
    }
}

/// Fits the estimator's rule to samples with a Boltzmann model.
pub fn fit_boltzmann(
    est: &Estimator,
    dim: usize,
    samples: &[usize],
    config: &FitConfig,
) -> Result<localscore_core::estimation::FitResult<BoltzmannModel>> {
    let init = BoltzmannModel::zeros(dim)?;
    Ok(match est.hypercube_rule(dim)? {
        None => mle_fit(&init, samples, config)?,
        Some(rule) => fit(&rule, &init, samples, config)?,
    })
}

/// Parameters of a model as a report-friendly string.
pub fn params_string<M: UnnormalizedModel>(m: &M) -> String {
    let v: Vec<String> = m.params().iter().map(|p| format!("{p}")).collect();
    v.join(",")
}
