//! Command-line interface. Every command writes `name key=value` records,
//! one per line. Exit codes: 0 success, 1 a check failed, 2 usage or I/O.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use localscore_core::blocks::{cl_connectivity_matches_cover, rank_condition};
use localscore_core::estimation::{
    conditional_negative_log_loss, exact_negative_log_loss, fit, mle_fit, negative_log_loss, test_error, FitResult,
};
use localscore_core::graph::{derived_graph_n, diagnose, hamming_graph, PotentialClass};
use localscore_core::models::{exact_log_z, normalize};
use localscore_core::oracle::{self, OracleReport, Verdict};
use localscore_core::sampling::{
    ais_log_z, default_burn_in, exact_sample, gibbs_sample, random_boltzmann, AisConfig, RngStream,
};
use localscore_core::space::SpaceKind;
use localscore_core::{
    BlockSystem, BoltzmannModel, Locality, PotentialFamily, Probability, SampleSpace, ScoreSpec, ScoringRule,
    TabularModel, UnnormalizedModel,
};

use crate::config::{env_seed, ExperimentConfig, ModelKind, Task, SEED_ENV};
use crate::error::{CliError, Result};
use crate::experiment::{aggregate, fan_out, BoltzmannExperiment, ClassificationExperiment, Estimator, Repetition};
use crate::formats::{
    parse_space, read_graph, read_model, read_samples, samples_to_string, write_model, write_text, AnyModel, SampleFile,
};
use crate::optdigits::{self, ingest, inject_label_noise, LABELS};
use crate::report::{Record, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "localscore",
    version,
    about = "Local proper scoring rules for unnormalized discrete models",
    after_help = "Exit status: 0 success, 1 a check failed, 2 usage or I/O error.\n\
                  Seeds default to $LOCALSCORE_SEED, then 0."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Neighborhood-graph diagnostics: connectivity, covers, derived graphs,
    /// and whether the coincidence axiom is guaranteed.
    Graph(GraphArgs),
    /// Fit models: a config file (any task) or a sample file with flags.
    Fit(FitArgs),
    /// Test negative log-loss of a saved model, with exact or AIS log Z.
    Eval(EvalArgs),
    /// Draw samples from a saved or random model.
    Sample(SampleArgs),
    /// Run oracle self-checks.
    Check(CheckArgs),
    /// Repeated classification runs on the digits file.
    Classify(ClassifyArgs),
    /// Read a digits file, select and binarize features, inject label noise.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Sample space: hypercube:D, labels:L or enumerated:N.
    #[arg(long)]
    pub space: Option<String>,
    /// Hamming radius (hypercube) or band half-width (labels).
    #[arg(long, conflicts_with_all = ["blocks", "graph"])]
    pub radius: Option<usize>,
    /// Block system on the hypercube, 1-based, e.g. "1;2,3".
    #[arg(long, conflicts_with = "graph")]
    pub blocks: Option<String>,
    /// Graph file (`space` header then `i j` edge lines).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Potential whose coincidence condition is tested: pl, rm, dp[:g],
    /// ps[:g], cl or mcl. Defaults to pl, or mcl with --blocks.
    #[arg(long)]
    pub potential: Option<String>,
    /// Comma-separated point indices forming Y0 (default: all of Y).
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// TOML experiment config. Flags below override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Config override, key=value (dotted keys for tables, e.g. fit.l2_penalty=0.1).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Sample file to fit (selects the fit task).
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Sample space; defaults to the sample file header.
    #[arg(long)]
    pub space: Option<String>,
    /// Estimator: mle or <score spec>@k, e.g. pl@1, ps:1@2, mcl:1;2. Repeatable.
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
    /// Model family for sample files.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Neighborhood graph file (needed for scores on enumerated spaces).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Write the fitted model here (one estimator only).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Random seed for synthetic tasks; 0 when neither the flag nor the variable is set.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Boltzmann,
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogZArg {
    Exact,
    Ais,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Test sample file (Boltzmann and tabular models).
    #[arg(long, conflicts_with = "digits")]
    pub samples: Option<PathBuf>,
    /// Test digits file (conditional models).
    #[arg(long)]
    pub digits: Option<PathBuf>,
    /// Digits feature columns, 0-based, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<usize>>,
    /// Map digits features 0 to -1 and 1..16 to +1.
    #[arg(long)]
    pub binarize: bool,
    /// How log Z is obtained (Boltzmann models).
    #[arg(long, value_enum, default_value = "exact")]
    pub logz: LogZArg,
    /// AIS temperatures K.
    #[arg(long, default_value_t = AisConfig::default().num_temperatures)]
    pub ais_temperatures: usize,
    /// AIS chains M.
    #[arg(long, default_value_t = AisConfig::default().num_chains)]
    pub ais_chains: usize,
    /// Random seed for AIS; 0 when neither the flag nor the variable is set.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Exact for spaces up to 2^16 points, Gibbs beyond.
    Auto,
    Exact,
    Gibbs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Model file to sample from.
    #[arg(long, conflicts_with = "random_bm")]
    pub model: Option<PathBuf>,
    /// Sample from a random Boltzmann machine of this dimension.
    #[arg(long, value_name = "D")]
    pub random_bm: Option<usize>,
    /// Standard deviation of W~ entries for --random-bm.
    #[arg(long, default_value_t = 1.0)]
    pub weight_scale: f64,
    /// Save the random Boltzmann machine here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    /// Gibbs burn-in sweeps [default: 100 D].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Gibbs sweeps per kept sample.
    #[arg(long, default_value_t = 1)]
    pub thinning: usize,
    /// Random seed; 0 when neither the flag nor the variable is set.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Sample file to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Comma-separated checks; `default` expands to the default suite.
    /// Known: properness, paths, homogeneity, divergence, cl-reduction,
    /// block-connectivity, rank-example, components, coincidence; and two that are
    /// expected to fail: coincidence-ps-r1 and cl-graph-properness.
    /// `all` runs every check.
    #[arg(long, value_delimiter = ',', default_value = "default")]
    pub checks: Vec<String>,
    /// Checks expected to fail; they count as success when they do.
    #[arg(long, value_delimiter = ',')]
    pub expect_fail: Vec<String>,
    /// Random trials per check.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Random seed; 0 when neither the flag nor the variable is set.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// TOML experiment config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Config override, key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Digits file (comma-separated rows, label last).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Feature columns, 0-based, comma-separated. The choice of columns is
    /// left to the user.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<usize>>,
    #[arg(long)]
    pub binarize: bool,
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Fraction of labels replaced uniformly at random.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Estimator: mle or <score spec>@k on the label band. Repeatable.
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
    /// Number of random splits.
    #[arg(long)]
    pub splits: Option<usize>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Random seed; 0 when neither the flag nor the variable is set.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Digits file.
    #[arg(long)]
    pub data: PathBuf,
    /// Feature columns, 0-based, comma-separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<usize>>,
    #[arg(long)]
    pub binarize: bool,
    /// Fraction of labels replaced uniformly at random.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Random seed; 0 when neither the flag nor the variable is set.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Write the selected rows here (same comma-separated layout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// With --binarize, write the rows as a hypercube sample file here.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

/// Runs a parsed command; returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Graph(a) => cmd_graph(a, out),
        Command::Fit(a) => cmd_fit(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Classify(a) => cmd_classify(a, out),
        Command::Ingest(a) => cmd_ingest(a, out),
    }
}

fn emit(out: &mut dyn Write, report: &Report, copy: Option<&Path>) -> Result<()> {
    let text = report.to_string();
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
    if let Some(path) = copy {
        write_text(path, &text)?;
    }
    Ok(())
}

fn seed_or_env(seed: Option<u64>) -> Result<u64> {
    seed.map_or_else(env_seed, Ok)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.into()).to_string()
}

fn toml_path(p: &Path) -> String {
    toml_string(&p.to_string_lossy())
}

fn potential_class(spec: &ScoreSpec) -> PotentialClass {
    match spec {
        ScoreSpec::Ps(_) => PotentialClass::PseudoSpherical,
        _ => PotentialClass::StrictlyConvex,
    }
}

fn cmd_graph(a: GraphArgs, out: &mut dyn Write) -> Result<i32> {
    let graph_file = a.graph.as_deref().map(read_graph).transpose()?;
    let space = match (&a.space, &graph_file) {
        (Some(s), Some(g)) => {
            let s = parse_space(s)?;
            if &s != g.space() {
                return Err(CliError::Usage("--space disagrees with the graph file header".into()));
            }
            s
        }
        (Some(s), None) => parse_space(s)?,
        (None, Some(g)) => g.space().clone(),
        (None, None) => return Err(CliError::Usage("give --space or --graph".into())),
    };
    let spec = match a.potential.as_deref() {
        // the exponent does not change the graph condition
        Some("ps") => ScoreSpec::Ps(1.0),
        Some("dp") => ScoreSpec::Dp(1.0),
        Some(p) => ScoreSpec::parse(p)?,
        None if a.blocks.is_some() => ScoreSpec::Mcl(None),
        None => ScoreSpec::Pl,
    };
    if spec.blocks().is_some() {
        return Err(CliError::Usage("give blocks with --blocks, not inside --potential".into()));
    }
    let mut report = Report::default();
    let mut block_system = None;
    let locality = if let Some(g) = graph_file {
        Locality::graph(g)
    } else if let Some(text) = &a.blocks {
        let dim = space
            .hypercube_dim()
            .ok_or_else(|| CliError::Usage("--blocks needs a hypercube space".into()))?;
        let b = BlockSystem::parse(dim, text)?;
        block_system = Some(b.clone());
        Locality::blocks(b)
    } else {
        let k = a.radius.unwrap_or(1);
        match space.kind() {
            SpaceKind::Hypercube { dim } => Locality::hamming(*dim, k)?,
            SpaceKind::LabelRange { labels } => {
                Locality::graph(localscore_core::graph::label_band_graph(*labels, k)?)
            }
            SpaceKind::Enumerated(_) => return Err(CliError::Usage("enumerated spaces need --graph".into())),
        }
    };
    let g = locality.materialize()?;
    let subset: Vec<usize> = match &a.subset {
        Some(s) => s.clone(),
        None => (0..space.size()).collect(),
    };
    let class = potential_class(&spec);
    let d = diagnose(&g, &subset, class)?;
    let (kind, param) = space.header();
    report.push(
        Record::new("graph")
            .field("space", format!("{kind}:{param}"))
            .field("locality", locality.describe())
            .field("vertices", g.space().size())
            .field("edges", g.edge_count())
            .field("connected", g.is_connected())
            .field("subset_size", subset.len()),
    );
    report.push(
        Record::new("diagnostics")
            .field("potential", &spec)
            .field(
                "class",
                match class {
                    PotentialClass::StrictlyConvex => "strictly-convex",
                    PotentialClass::PseudoSpherical => "pseudo-spherical",
                },
            )
            .field("covers_n", d.covers_n)
            .field("covers_b", d.covers_b)
            .field("g0_components", d.component_count_g0)
            .field("g0prime_components", d.component_count_g0prime)
            .field("coincidence_guaranteed", d.coincidence_guaranteed()),
    );
    let mut summary = if d.coincidence_guaranteed() {
        "coincidence guaranteed".to_string()
    } else {
        match class {
            PotentialClass::PseudoSpherical => format!(
                "coincidence NOT guaranteed; G0' components: {}{}",
                d.component_count_g0prime,
                if d.covers_b { "" } else { "; b-neighborhoods do not cover Y0" }
            ),
            PotentialClass::StrictlyConvex => format!(
                "coincidence NOT guaranteed; G0 components: {}{}",
                d.component_count_g0,
                if d.covers_n { "" } else { "; n-neighborhoods do not cover Y0" }
            ),
        }
    };
    if let Some(b) = &block_system {
        let cover = b.covers_all_coordinates();
        let all: Vec<usize> = (0..space.size()).collect();
        let connected = derived_graph_n(&g, &all)?.is_connected();
        report.push(
            Record::new("blocks")
                .field("count", b.block_count())
                .field("coordinate_cover", cover)
                .field("g0_connected", connected)
                .field("agree", cl_connectivity_matches_cover(b)?),
        );
        summary = format!(
            "{}; {}; {summary}",
            if cover { "cover holds" } else { "cover fails" },
            if connected { "connected" } else { "disconnected" }
        );
    }
    report.push(Record::new("summary").field("message", summary));
    emit(out, &report, None)?;
    Ok(EXIT_OK)
}

fn fit_overrides(a: &FitArgs) -> Vec<String> {
    let mut o = Vec::new();
    if let Some(p) = &a.samples {
        o.push("task=\"fit\"".into());
        o.push(format!("data={}", toml_path(p)));
    }
    if let Some(s) = &a.space {
        o.push(format!("space={}", toml_string(s)));
    }
    if !a.estimators.is_empty() {
        let list: Vec<String> = a.estimators.iter().map(|e| toml_string(e)).collect();
        o.push(format!("estimators=[{}]", list.join(",")));
    }
    if let Some(m) = a.model {
        o.push(format!(
            "model=\"{}\"",
            match m {
                ModelArg::Boltzmann => "boltzmann",
                ModelArg::Tabular => "tabular",
            }
        ));
    }
    if let Some(g) = &a.graph {
        o.push(format!("graph={}", toml_path(g)));
    }
    if let Some(p) = &a.output {
        o.push(format!("output={}", toml_path(p)));
    }
    if let Some(s) = a.seed {
        o.push(format!("seed={s}"));
    }
    if let Some(p) = &a.report {
        o.push(format!("report={}", toml_path(p)));
    }
    o
}

fn load_config(path: Option<&Path>, mut overrides: Vec<String>, extra: Vec<String>) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    overrides.extend(extra);
    ExperimentConfig::parse(&text, &overrides)
}

fn cmd_fit(a: FitArgs, out: &mut dyn Write) -> Result<i32> {
    let mut extra = fit_overrides(&a);
    // a sample file fixes the space unless one was given
    if let (Some(p), None) = (&a.samples, &a.space) {
        let s = read_samples(p)?;
        let (kind, param) = s.space.header();
        extra.insert(0, format!("space=\"{kind}:{param}\""));
    }
    let config = load_config(a.config.as_deref(), a.overrides.clone(), extra)?;
    run_config(&config, out)
}

/// Runs any configured task and emits its report.
pub fn run_config(config: &ExperimentConfig, out: &mut dyn Write) -> Result<i32> {
    let report = match config.task {
        Task::Boltzmann => boltzmann_report(config)?,
        Task::Classify => classify_report(config)?,
        Task::Fit => fit_report(config)?,
    };
    emit(out, &report, config.report.as_deref())?;
    Ok(EXIT_OK)
}

fn repetition_records(report: &mut Report, reps: &[Repetition]) {
    for rep in reps {
        report.push(
            Record::new("repetition")
                .field("index", rep.index)
                .field("reference_loss", rep.reference_loss),
        );
        for o in &rep.outcomes {
            let mut r = Record::new("outcome")
                .field("rep", rep.index)
                .field("estimator", &o.estimator)
                .field("test_loss", o.test_loss);
            if let Some(e) = o.test_error {
                r = r.field("test_error", e);
            }
            r = r
                .field("converged", o.converged)
                .field("iterations", o.iterations)
                .field("objective", o.final_objective);
            if let Some(e) = &o.error {
                r = r.field("error", e);
            }
            report.push(r);
        }
    }
    for (name, loss, err) in aggregate(reps) {
        let mut r = Record::new("summary").field("estimator", name);
        if let Some(s) = loss {
            r = r
                .field("n", s.count)
                .field("loss_mean", s.mean)
                .field("loss_sd", s.sd)
                .field("loss_median", s.median)
                .field("loss_mad", s.mad);
        }
        if let Some(s) = err {
            r = r.field("error_mean", s.mean).field("error_sd", s.sd);
        }
        report.push(r);
    }
}

fn boltzmann_report(c: &ExperimentConfig) -> Result<Report> {
    let dim = c.sample_space()?.hypercube_dim().expect("validated");
    let exp = BoltzmannExperiment {
        dim,
        n_train: c.n_train,
        n_test: c.n_test,
        weight_scale: c.weight_scale,
        estimators: c.parsed_estimators()?,
        sampler: c.sampler(),
        log_z: c.log_z_method(),
        fit: c.fit.to_config(),
        seed: c.resolved_seed()?,
    };
    exp.validate()?;
    let reps = fan_out(c.repetitions, c.threads, |r| exp.run_repetition(r))?;
    let mut report = Report::default();
    report.push(
        Record::new("experiment")
            .field("task", "boltzmann")
            .field("dim", dim)
            .field("n_train", c.n_train)
            .field("n_test", c.n_test)
            .field("repetitions", c.repetitions)
            .field("seed", exp.seed)
            .field("uniform_loss", dim as f64 * core::f64::consts::LN_2),
    );
    repetition_records(&mut report, &reps);
    Ok(report)
}

fn load_digits(c: &ExperimentConfig) -> Result<optdigits::Digits> {
    let path = c.data.as_deref().expect("validated");
    ingest(path, c.features.as_deref(), c.binarize)
}

fn classify_report(c: &ExperimentConfig) -> Result<Report> {
    let data = load_digits(c)?;
    let exp = ClassificationExperiment {
        n_train: c.n_train,
        noise: c.noise,
        estimators: c.parsed_estimators()?,
        fit: c.fit.to_config(),
        seed: c.resolved_seed()?,
    };
    exp.validate()?;
    if c.n_train >= data.len() {
        return Err(CliError::Usage(format!(
            "n_train={} leaves no test rows out of {}",
            c.n_train,
            data.len()
        )));
    }
    let reps = fan_out(c.repetitions, c.threads, |r| exp.run_split(&data, r))?;
    let mut report = Report::default();
    report.push(
        Record::new("experiment")
            .field("task", "classify")
            .field("rows", data.len())
            .field("features", data.feature_count())
            .field("n_train", c.n_train)
            .field("noise", c.noise)
            .field("splits", c.repetitions)
            .field("seed", exp.seed),
    );
    repetition_records(&mut report, &reps);
    Ok(report)
}

fn fit_record<M: UnnormalizedModel>(est: &Estimator, r: &FitResult<M>) -> Record {
    Record::new("fit")
        .field("estimator", est)
        .field("objective", r.final_objective)
        .field("gradient_norm", r.gradient_norm)
        .field("iterations", r.iterations_used)
        .field("converged", r.converged)
        .field("params", crate::experiment::params_string(&r.model))
}

fn fit_report(c: &ExperimentConfig) -> Result<Report> {
    let path = c.data.as_deref().expect("validated");
    let samples = read_samples(path)?;
    let space = c.sample_space()?;
    if samples.space != space {
        return Err(CliError::Usage(format!(
            "{}: sample space differs from the configured space {}",
            path.display(),
            c.space
        )));
    }
    let graph = c.graph.as_deref().map(read_graph).transpose()?;
    let cfg = c.fit.to_config();
    let mut report = Report::default();
    report.push(
        Record::new("experiment")
            .field("task", "fit")
            .field("space", &c.space)
            .field("n", samples.points.len())
            .field(
                "model",
                match c.model {
                    ModelKind::Boltzmann => "boltzmann",
                    ModelKind::Tabular => "tabular",
                },
            ),
    );
    let mut last = None;
    for est in c.parsed_estimators()? {
        let rule = est.rule_on(&space, graph.as_ref())?;
        let fitted = match c.model {
            ModelKind::Boltzmann => {
                let init = BoltzmannModel::zeros(space.hypercube_dim().expect("validated"))?;
                let r = run_fit(rule.as_ref(), &init, &samples.points, &cfg)?;
                report.push(fit_record(&est, &r));
                AnyModel::Boltzmann(r.model)
            }
            ModelKind::Tabular => {
                let init = TabularModel::zeros(space.clone())?;
                let r = run_fit(rule.as_ref(), &init, &samples.points, &cfg)?;
                let p = normalize(&r.model)?;
                report.push(
                    fit_record(&est, &r).field(
                        "probabilities",
                        p.weights().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                    ),
                );
                AnyModel::Tabular(r.model)
            }
        };
        last = Some(fitted);
    }
    if let (Some(path), Some(model)) = (&c.output, last) {
        write_model(path, &model)?;
        report.push(Record::new("model").field("path", path.display()).field("kind", model.kind()));
    }
    Ok(report)
}

fn run_fit<M: UnnormalizedModel + Clone>(
    rule: Option<&ScoringRule>,
    init: &M,
    samples: &[usize],
    cfg: &localscore_core::estimation::FitConfig,
) -> Result<FitResult<M>> {
    Ok(match rule {
        None => mle_fit(init, samples, cfg)?,
        Some(rule) => fit(rule, init, samples, cfg)?,
    })
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let model = read_model(&a.model)?;
    let mut report = Report::default();
    match &model {
        AnyModel::Conditional(m) => {
            let path = a
                .digits
                .as_deref()
                .ok_or_else(|| CliError::Usage("conditional models are evaluated on --digits".into()))?;
            let data = ingest(path, a.features.as_deref(), a.binarize)?.to_labeled()?;
            report.push(
                Record::new("eval")
                    .field("model", "conditional")
                    .field("n", data.len())
                    .field("test_loss", conditional_negative_log_loss(m, &data)?)
                    .field("test_error", test_error(m, &data)?),
            );
        }
        AnyModel::Boltzmann(_) | AnyModel::Tabular(_) => {
            let path = a
                .samples
                .as_deref()
                .ok_or_else(|| CliError::Usage("give the test data with --samples".into()))?;
            let s = read_samples(path)?;
            let m: &dyn UnnormalizedModel = match &model {
                AnyModel::Boltzmann(m) => m,
                AnyModel::Tabular(m) => m,
                AnyModel::Conditional(_) => unreachable!(),
            };
            if s.space != m.space() {
                return Err(CliError::Usage("test samples and model live on different spaces".into()));
            }
            let mut r = Record::new("eval").field("model", model.kind()).field("n", s.points.len());
            let log_z = match (a.logz, &model) {
                (LogZArg::Ais, AnyModel::Boltzmann(bm)) => {
                    let cfg = AisConfig {
                        num_temperatures: a.ais_temperatures,
                        num_chains: a.ais_chains,
                        ..AisConfig::default()
                    };
                    let est = ais_log_z(bm, &cfg, seed_or_env(a.seed)?)?;
                    r = r.field("logz_method", "ais").field("logz_std_error", est.std_error);
                    est.estimate
                }
                (LogZArg::Ais, _) => return Err(CliError::Usage("AIS is implemented for Boltzmann models".into())),
                (LogZArg::Exact, _) => {
                    r = r.field("logz_method", "exact");
                    exact_log_z(m)?
                }
            };
            let loss = match a.logz {
                LogZArg::Exact => exact_negative_log_loss(m, &s.points)?,
                LogZArg::Ais => negative_log_loss(m, &s.points, log_z)?,
            };
            report.push(r.field("log_z", log_z).field("test_loss", loss));
        }
    }
    emit(out, &report, None)?;
    Ok(EXIT_OK)
}

fn cmd_sample(a: SampleArgs, out: &mut dyn Write) -> Result<i32> {
    let seed = seed_or_env(a.seed)?;
    let mut rng = RngStream::new(seed, 0);
    let model = match (&a.model, a.random_bm) {
        (Some(p), None) => read_model(p)?,
        (None, Some(dim)) => {
            let m = random_boltzmann(dim, a.weight_scale, &mut rng)?;
            let m = AnyModel::Boltzmann(m);
            if let Some(p) = &a.save_model {
                write_model(p, &m)?;
            }
            m
        }
        _ => return Err(CliError::Usage("give exactly one of --model and --random-bm".into())),
    };
    let mut data_rng = RngStream::new(seed, 1);
    let (space, method, points) = match &model {
        AnyModel::Conditional(_) => {
            return Err(CliError::Usage("sampling conditional models is not supported".into()));
        }
        AnyModel::Tabular(m) => {
            if a.method == MethodArg::Gibbs {
                return Err(CliError::Usage("Gibbs sampling needs a Boltzmann model".into()));
            }
            (m.space().clone(), "exact", exact_sample(&normalize(m)?, a.n, &mut data_rng))
        }
        AnyModel::Boltzmann(m) => {
            let exact = match a.method {
                MethodArg::Exact => true,
                MethodArg::Gibbs => false,
                MethodArg::Auto => m.space().is_enumerable(),
            };
            if a.n == 0 {
                return Err(CliError::Usage("--n must be positive".into()));
            }
            let points = if exact {
                exact_sample(&normalize(m)?, a.n, &mut data_rng)
            } else {
                let burn_in = a.burn_in.unwrap_or_else(|| default_burn_in(m.dim()));
                gibbs_sample(m, a.n, burn_in, a.thinning, &mut data_rng)?
            };
            (m.space().clone(), if exact { "exact" } else { "gibbs" }, points)
        }
    };
    if points.is_empty() {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let file = SampleFile {
        space,
        seed: Some(seed),
        points,
    };
    write_text(&a.output, &samples_to_string(&file))?;
    let mut report = Report::default();
    report.push(
        Record::new("sample")
            .field("method", method)
            .field("n", file.points.len())
            .field("seed", seed)
            .field("output", a.output.display()),
    );
    emit(out, &report, None)?;
    Ok(EXIT_OK)
}

pub const DEFAULT_CHECKS: [&str; 9] = [
    "properness",
    "paths",
    "homogeneity",
    "divergence",
    "cl-reduction",
    "block-connectivity",
    "rank-example",
    "components",
    "coincidence",
];

pub const ALL_CHECKS: [&str; 11] = [
    "properness",
    "paths",
    "homogeneity",
    "divergence",
    "cl-reduction",
    "block-connectivity",
    "rank-example",
    "components",
    "coincidence",
    "coincidence-ps-r1",
    "cl-graph-properness",
];

fn hamming(dim: usize, radius: usize) -> Result<Locality> {
    Ok(Locality::hamming(dim, radius)?)
}

/// Every score kind on small connected neighborhoods. Standard CL is
/// checked on block systems only; on a general graph it is not proper.
fn rule_suite() -> Result<Vec<ScoringRule>> {
    let mut rules = Vec::new();
    let localities = [
        hamming(2, 1)?,
        hamming(3, 1)?,
        hamming(4, 1)?,
        Locality::graph(localscore_core::graph::label_band_graph(6, 1)?),
    ];
    for loc in localities {
        for spec in ["pl", "rm", "dp:1", "ps:1", "mcl"] {
            rules.push(ScoreSpec::parse(spec)?.build(loc.clone())?);
        }
    }
    for (dim, blocks) in [(2, "1;2"), (3, "1;2;3"), (3, "1,2;2,3"), (4, "1,2;3,4"), (4, "1;2,3;3,4")] {
        let b = BlockSystem::parse(dim, blocks)?;
        rules.push(ScoringRule::CompositeLikelihood(Locality::blocks(b.clone())));
        rules.push(ScoreSpec::Mcl(None).build(Locality::blocks(b))?);
    }
    Ok(rules)
}

fn families(rules: &[ScoringRule]) -> Vec<&PotentialFamily> {
    rules
        .iter()
        .filter_map(|r| match r {
            ScoringRule::Homogeneous(f) => Some(f),
            ScoringRule::CompositeLikelihood(_) => None,
        })
        .collect()
}

fn structural(name: &str, ok: bool, note: String) -> OracleReport {
    OracleReport {
        check_name: name.into(),
        trials: 1,
        worst_violation: if ok { 0.0 } else { 1.0 },
        tolerance: 0.0,
        witnesses: if ok { Vec::new() } else { vec![note.clone()] },
        notes: vec![note],
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
    }
}

/// Runs one named check; each may produce several reports.
pub fn run_check(name: &str, trials: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let rules = rule_suite()?;
    let mut reports = Vec::new();
    match name {
        "properness" => {
            for r in &rules {
                reports.push(tagged(oracle::check_properness(r, trials, seed)?, r));
            }
        }
        "paths" => {
            for f in families(&rules) {
                reports.push(tagged(oracle::check_score_paths(f, trials.min(200), seed)?, f.locality()));
            }
        }
        "homogeneity" => {
            for r in &rules {
                reports.push(tagged(oracle::check_homogeneity(r, trials.min(200), seed)?, r));
            }
        }
        "divergence" => {
            for f in families(&rules) {
                reports.push(tagged(oracle::check_divergence_identity(f, trials.min(200), seed)?, f.locality()));
            }
        }
        "cl-reduction" => {
            let b = BlockSystem::singletons(3)?;
            reports.push(oracle::check_cl_reduction(&b, trials.min(100), seed, 1e-10)?);
        }
        "block-connectivity" => reports.push(oracle::check_theorem5(4, trials.min(200), seed)?),
        "rank-example" => {
            let pass = BlockSystem::parse(2, "1;2")?;
            let fail = BlockSystem::parse(3, "1;2,3")?;
            let ok_pass = (0..4).all(|y| rank_condition(&pass, y).unwrap_or(false));
            let ok_fail = (0..8).all(|y| !rank_condition(&fail, y).unwrap_or(true));
            reports.push(structural(
                "rank-example",
                ok_pass && ok_fail,
                format!("blocks 1;2 on D=2 hold={ok_pass}; blocks 1;2,3 on D=3 fail={ok_fail}"),
            ));
        }
        "components" => {
            let g = hamming_graph(2, 1)?;
            let all: Vec<usize> = (0..4).collect();
            let d = diagnose(&g, &all, PotentialClass::PseudoSpherical)?;
            reports.push(structural(
                "components",
                d.component_count_g0prime == 2,
                format!("hypercube D=2 radius 1: G0' components={}", d.component_count_g0prime),
            ));
        }
        "coincidence" => {
            let mut fams = Vec::new();
            for spec in ["pl", "rm", "dp:1", "mcl"] {
                fams.push(ScoreSpec::parse(spec)?.build(hamming(3, 1)?)?);
            }
            fams.push(ScoreSpec::parse("ps:1")?.build(hamming(2, 2)?)?);
            for r in &fams {
                if let ScoringRule::Homogeneous(f) = r {
                    reports.push(tagged(oracle::check_coincidence(f, trials, seed)?, f.locality()));
                }
            }
        }
        "cl-graph-properness" => {
            let r = ScoreSpec::Cl(None).build(hamming(2, 1)?)?;
            // the parity weights against a sharper parity split
            let p = Probability::from_weights(&[0.1, 0.4, 0.4, 0.1])?;
            let q = Probability::from_weights(&[0.065, 0.435, 0.435, 0.065])?;
            reports.push(tagged(oracle::check_properness_with(&r, &[(p, q)], trials, seed)?, &r));
        }
        "coincidence-ps-r1" => {
            let r = ScoreSpec::parse("ps:1")?.build(hamming(2, 1)?)?;
            if let ScoringRule::Homogeneous(f) = &r {
                reports.push(tagged(oracle::check_coincidence(f, trials, seed)?, f.locality()));
            }
        }
        other => return Err(CliError::Usage(format!("unknown check '{other}'"))),
    }
    Ok(reports)
}

trait Describe {
    fn describe_for_check(&self) -> String;
}

impl Describe for ScoringRule {
    fn describe_for_check(&self) -> String {
        self.locality().describe()
    }
}

impl Describe for Locality {
    fn describe_for_check(&self) -> String {
        self.describe()
    }
}

fn tagged(mut r: OracleReport, on: &dyn Describe) -> OracleReport {
    r.check_name = format!("{}@{}", r.check_name, on.describe_for_check().replace(char::is_whitespace, "_"));
    r
}

fn expand_checks(names: &[String]) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for n in names {
        let n = n.trim();
        let list: Vec<&str> = match n {
            "default" => DEFAULT_CHECKS.to_vec(),
            "all" => ALL_CHECKS.to_vec(),
            n if ALL_CHECKS.contains(&n) => vec![n],
            other => return Err(CliError::Usage(format!("unknown check '{other}'"))),
        };
        for l in list {
            if !out.iter().any(|o| o == l) {
                out.push(l.to_string());
            }
        }
    }
    Ok(out)
}

fn cmd_check(a: CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let seed = seed_or_env(a.seed)?;
    let checks = expand_checks(&a.checks)?;
    let expected = expand_checks(&a.expect_fail)?;
    let mut report = Report::default();
    let mut failures = 0;
    for name in &checks {
        let reports = run_check(name, a.trials, seed)?;
        let passed = reports.iter().all(OracleReport::passed);
        let expect_fail = expected.contains(name);
        for r in &reports {
            report.push(
                Record::new("oracle")
                    .field("check", name)
                    .field("name", &r.check_name)
                    .field("verdict", r.verdict)
                    .field("trials", r.trials)
                    .field("worst_violation", format!("{:e}", r.worst_violation))
                    .field("tolerance", format!("{:e}", r.tolerance)),
            );
            for n in &r.notes {
                report.push(Record::new("note").field("name", &r.check_name).field("text", n));
            }
            for w in &r.witnesses {
                report.push(Record::new("witness").field("name", &r.check_name).field("text", w));
            }
        }
        let ok = passed != expect_fail;
        if !ok {
            failures += 1;
        }
        report.push(
            Record::new("check")
                .field("name", name)
                .field("verdict", if passed { "pass" } else { "fail" })
                .field("expected", if expect_fail { "fail" } else { "pass" })
                .field("ok", ok),
        );
    }
    report.push(
        Record::new("checks")
            .field("total", checks.len())
            .field("failures", failures)
            .field("seed", seed),
    );
    emit(out, &report, None)?;
    Ok(if failures == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_classify(a: ClassifyArgs, out: &mut dyn Write) -> Result<i32> {
    let mut extra = vec!["task=\"classify\"".to_string(), format!("space=\"labels:{LABELS}\"")];
    if let Some(p) = &a.data {
        extra.push(format!("data={}", toml_path(p)));
    }
    if let Some(f) = &a.features {
        let v: Vec<String> = f.iter().map(|i| i.to_string()).collect();
        extra.push(format!("features=[{}]", v.join(",")));
    }
    if a.binarize {
        extra.push("binarize=true".into());
    }
    if let Some(n) = a.n_train {
        extra.push(format!("n_train={n}"));
    }
    if let Some(r) = a.noise {
        extra.push(format!("noise={r:?}"));
    }
    if !a.estimators.is_empty() {
        let list: Vec<String> = a.estimators.iter().map(|e| toml_string(e)).collect();
        extra.push(format!("estimators=[{}]", list.join(",")));
    }
    if let Some(s) = a.splits {
        extra.push(format!("repetitions={s}"));
    }
    if let Some(t) = a.threads {
        extra.push(format!("threads={t}"));
    }
    if let Some(s) = a.seed {
        extra.push(format!("seed={s}"));
    }
    if let Some(p) = &a.report {
        extra.push(format!("report={}", toml_path(p)));
    }
    let config = load_config(a.config.as_deref(), a.overrides.clone(), extra)?;
    run_config(&config, out)
}

fn cmd_ingest(a: IngestArgs, out: &mut dyn Write) -> Result<i32> {
    let seed = seed_or_env(a.seed)?;
    let mut digits = ingest(&a.data, a.features.as_deref(), a.binarize)?;
    let mut rng = RngStream::new(seed, 0);
    let changed = inject_label_noise(&mut digits.labels, a.noise, LABELS, &mut rng)?;
    let mut counts = [0usize; LABELS];
    for &y in &digits.labels {
        counts[y] += 1;
    }
    let mut report = Report::default();
    report.push(
        Record::new("ingest")
            .field("rows", digits.len())
            .field("features", digits.feature_count())
            .field("binarize", a.binarize)
            .field("noisy_rows", changed.len())
            .field("seed", seed),
    );
    report.push(
        Record::new("labels").field(
            "counts",
            counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
        ),
    );
    if let Some(p) = &a.output {
        let mut text = String::new();
        for (row, y) in digits.features.iter().zip(&digits.labels) {
            for v in row {
                text.push_str(&format!("{v},"));
            }
            text.push_str(&format!("{y}\n"));
        }
        write_text(p, &text)?;
        report.push(Record::new("written").field("path", p.display()).field("kind", "rows"));
    }
    if let Some(p) = &a.samples {
        if !a.binarize {
            return Err(CliError::Usage("--samples needs --binarize".into()));
        }
        let points = digits.hypercube_points()?;
        let file = SampleFile {
            space: SampleSpace::hypercube(digits.feature_count())?,
            seed: Some(seed),
            points,
        };
        write_text(p, &samples_to_string(&file))?;
        report.push(Record::new("written").field("path", p.display()).field("kind", "samples"));
    }
    emit(out, &report, None)?;
    Ok(EXIT_OK)
}

/// Exit code for an error.
pub fn exit_code(_e: &CliError) -> i32 {
    EXIT_USAGE
}

