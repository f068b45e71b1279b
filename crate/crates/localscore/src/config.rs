//! Experiment configuration: a TOML document, overridable key by key with
//! `--set key=value`.

use std::path::{Path, PathBuf};

use localscore_core::estimation::FitConfig;
use localscore_core::sampling::AisConfig;
use localscore_core::SampleSpace;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiment::{Estimator, LogZMethod, Sampler};
use crate::formats::parse_space;

pub const SEED_ENV: &str = "LOCALSCORE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Random Boltzmann machines, synthetic data, repeated fits.
    Boltzmann,
    /// Conditional label models on the digits file.
    Classify,
    /// One fit per estimator on a sample file.
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Boltzmann,
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Exact,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogZKind {
    Exact,
    Ais,
}

/// Optimizer settings; every field falls back to the library default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub l2_penalty: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            max_iterations: d.max_iterations,
            gradient_tolerance: d.gradient_tolerance,
            initial_step: d.initial_step,
            max_step: d.max_step,
            armijo_c: d.armijo_c,
            backtrack_factor: d.backtrack_factor,
            l2_penalty: d.l2_penalty,
        }
    }
}

impl FitSection {
    pub fn to_config(&self) -> FitConfig {
        FitConfig {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            initial_step: self.initial_step,
            max_step: self.max_step,
            armijo_c: self.armijo_c,
            backtrack_factor: self.backtrack_factor,
            l2_penalty: self.l2_penalty,
            deterministic_reduction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Falls back to `LOCALSCORE_SEED`, then 0.
    pub seed: Option<u64>,
    /// `hypercube:D`, `labels:L` or `enumerated:N`.
    pub space: String,
    /// Neighborhood graph file; required for scores on enumerated spaces.
    pub graph: Option<PathBuf>,
    pub model: ModelKind,
    /// `mle` or `<score spec>@k`.
    pub estimators: Vec<String>,
    /// Sample file (fit) or digits file (classify). Boltzmann runs are synthetic.
    pub data: Option<PathBuf>,
    /// Digits feature columns, 0-based.
    pub features: Option<Vec<usize>>,
    pub binarize: bool,
    /// Label-noise rate for classification.
    pub noise: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of the entries of `W̃`.
    pub weight_scale: f64,
    pub sampler: SamplerKind,
    pub burn_in: Option<usize>,
    pub thinning: usize,
    pub log_z: LogZKind,
    pub ais_temperatures: usize,
    pub ais_chains: usize,
    pub repetitions: usize,
    /// Worker threads for repetitions; 0 uses every core.
    pub threads: usize,
    /// Where the fitted model goes (fit task with one estimator).
    pub output: Option<PathBuf>,
    /// Report destination; stdout when absent.
    pub report: Option<PathBuf>,
    pub fit: FitSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ais = AisConfig::default();
        Self {
            task: Task::Boltzmann,
            seed: None,
            space: "hypercube:8".into(),
            graph: None,
            model: ModelKind::Boltzmann,
            estimators: vec!["mle".into(), "pl@1".into(), "pl@2".into()],
            data: None,
            features: None,
            binarize: false,
            noise: 0.1,
            n_train: 1000,
            n_test: 5000,
            weight_scale: 1.0,
            sampler: SamplerKind::Exact,
            burn_in: None,
            thinning: 1,
            log_z: LogZKind::Exact,
            ais_temperatures: ais.num_temperatures,
            ais_chains: ais.num_chains,
            repetitions: 1,
            threads: 0,
            output: None,
            report: None,
            fit: FitSection::default(),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Applies `key=value` (dotted keys reach into tables).
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{assignment}' is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override key '{key}': '{part}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The configured seed, else `LOCALSCORE_SEED`, else 0.
    pub fn resolved_seed(&self) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => env_seed(),
        }
    }

    pub fn sample_space(&self) -> Result<SampleSpace> {
        parse_space(&self.space)
    }

    pub fn parsed_estimators(&self) -> Result<Vec<Estimator>> {
        self.estimators.iter().map(|e| e.parse()).collect()
    }

    pub fn sampler(&self) -> Sampler {
        match self.sampler {
            SamplerKind::Exact => Sampler::Exact,
            SamplerKind::Gibbs => Sampler::Gibbs {
                burn_in: self.burn_in,
                thinning: self.thinning,
            },
        }
    }

    pub fn log_z_method(&self) -> LogZMethod {
        match self.log_z {
            LogZKind::Exact => LogZMethod::Exact,
            LogZKind::Ais => LogZMethod::Ais(AisConfig {
                num_temperatures: self.ais_temperatures,
                num_chains: self.ais_chains,
                ..AisConfig::default()
            }),
        }
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let space = self.sample_space()?;
        let estimators = self.parsed_estimators()?;
        if estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        let hypercube = space.hypercube_dim().is_some();
        for e in &estimators {
            if let Estimator::Score { spec, .. } = e {
                if spec.blocks().is_some() && (!hypercube || self.task == Task::Classify) {
                    return bad(format!("estimator '{e}': block systems need a hypercube space"));
                }
            }
        }
        if self.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if self.thinning == 0 {
            return bad("thinning must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1]".into());
        }
        match self.task {
            Task::Boltzmann => {
                if !hypercube {
                    return bad("the boltzmann task needs a hypercube space".into());
                }
                if self.model != ModelKind::Boltzmann {
                    return bad("the boltzmann task fits Boltzmann models".into());
                }
                if self.data.is_some() {
                    return bad("the boltzmann task generates its own data; use task = \"fit\" for a file".into());
                }
                if !(self.weight_scale >= 0.0 && self.weight_scale.is_finite()) {
                    return bad("weight_scale must be nonnegative".into());
                }
            }
            Task::Classify => {
                if self.data.is_none() {
                    return bad("the classify task needs data = <digits file>".into());
                }
            }
            Task::Fit => {
                if self.data.is_none() {
                    return bad("the fit task needs data = <sample file>".into());
                }
                if self.model == ModelKind::Boltzmann && !hypercube {
                    return bad("Boltzmann models live on hypercube spaces".into());
                }
                if self.graph.is_none()
                    && matches!(space.kind(), localscore_core::space::SpaceKind::Enumerated(_))
                    && estimators.iter().any(|e| *e != Estimator::Mle)
                {
                    return bad("scores on enumerated spaces need graph = <graph file>".into());
                }
                if self.output.is_some() && estimators.len() != 1 {
                    return bad("output is only valid with a single estimator".into());
                }
            }
        }
        self.fit.to_config().validate()?;
        Ok(())
    }
}

/// Seed from `LOCALSCORE_SEED`, 0 when unset.
pub fn env_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{s}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::parse(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ExperimentConfig::parse(
            "task = \"boltzmann\"\nspace = \"hypercube:4\"\n",
            &[
                "n_train=500".into(),
                "fit.l2_penalty=0.5".into(),
                "estimators=[\"pl@1\",\"rm@2\"]".into(),
                "sampler=gibbs".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.n_train, 500);
        assert_eq!(c.fit.l2_penalty, 0.5);
        assert_eq!(c.estimators, vec!["pl@1", "rm@2"]);
        assert_eq!(c.sampler, SamplerKind::Gibbs);
    }

    #[test]
    fn referential_checks() {
        let labels_blocks = "task = \"classify\"\nspace = \"labels:10\"\ndata = \"x\"\nestimators = [\"mcl:1;2\"]\n";
        assert!(ExperimentConfig::parse(labels_blocks, &[]).is_err());
        assert!(ExperimentConfig::parse("task = \"fit\"\n", &[]).is_err());
        assert!(ExperimentConfig::parse("task = \"boltzmann\"\nspace = \"labels:3\"\n", &[]).is_err());
        assert!(ExperimentConfig::parse("unknown_key = 1\n", &[]).is_err());
        assert!(ExperimentConfig::parse("", &["n_train".into()]).is_err());
        let ok = "task = \"fit\"\nspace = \"hypercube:3\"\ndata = \"s.txt\"\nestimators = [\"mcl:1;2,3\"]\n";
        assert!(ExperimentConfig::parse(ok, &[]).is_ok());
    }
}
