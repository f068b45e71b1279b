//! Text file formats: space specs, edge-list graphs, sample files and model
//! documents.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use localscore_core::graph::NeighborhoodGraph;
use localscore_core::models::{BoltzmannModel, ConditionalModel, TabularModel};
use localscore_core::SampleSpace;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Parses `hypercube:D`, `labels:L` or `enumerated:N` (also accepts a
/// space instead of the colon).
pub fn parse_space(text: &str) -> Result<SampleSpace> {
    let text = text.trim();
    let (kind, param) = text
        .split_once(|c: char| c == ':' || c.is_whitespace())
        .ok_or_else(|| CliError::Usage(format!("space spec '{text}' must look like hypercube:8")))?;
    let n: usize = param
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad space parameter '{param}'")))?;
    Ok(match kind {
        "hypercube" => SampleSpace::hypercube(n)?,
        "labels" => SampleSpace::labels(n)?,
        "enumerated" => SampleSpace::enumerated((0..n).map(|i| i.to_string()).collect())?,
        other => return Err(CliError::Usage(format!("unknown space kind '{other}'"))),
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Edge list with a `space <kind> <param>` header; `#` starts a comment.
pub fn read_graph(path: &Path) -> Result<NeighborhoodGraph> {
    parse_graph(&read(path)?, path)
}

pub fn parse_graph(text: &str, path: &Path) -> Result<NeighborhoodGraph> {
    let mut space = None;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix("space") {
            if space.is_some() {
                return Err(CliError::format(path, lineno, "duplicate space header"));
            }
            space = Some(parse_space(rest).map_err(|e| CliError::format(path, lineno, e.to_string()))?);
            continue;
        }
        if space.is_none() {
            return Err(CliError::format(path, lineno, "edge before the space header"));
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| CliError::format(path, lineno, format!("expected 'i j', got '{line}'")))
        };
        let a = parse(it.next())?;
        let b = parse(it.next())?;
        if it.next().is_some() {
            return Err(CliError::format(path, lineno, "trailing tokens"));
        }
        edges.push((a, b));
    }
    let space = space.ok_or_else(|| CliError::format(path, 1, "missing space header"))?;
    Ok(NeighborhoodGraph::from_edges(space, &edges)?)
}

pub fn graph_to_string(g: &NeighborhoodGraph) -> String {
    let mut out = format!("space {}\n", g.space());
    for (a, b) in g.edges() {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

/// Samples with their space and the seed recorded in the header.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub space: SampleSpace,
    pub seed: Option<u64>,
    pub points: Vec<usize>,
}

/// Header `# space <kind> <param> seed <seed>`, then one sample per line:
/// space-separated ±1 for hypercubes, a single index otherwise.
pub fn samples_to_string(file: &SampleFile) -> String {
    let mut out = format!("# space {}", file.space);
    if let Some(seed) = file.seed {
        let _ = write!(out, " seed {seed}");
    }
    out.push('\n');
    match file.space.hypercube_dim() {
        Some(dim) => {
            for &y in &file.points {
                let row: Vec<&str> = (0..dim).map(|i| if y >> i & 1 == 1 { "1" } else { "-1" }).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        None => {
            for &y in &file.points {
                let _ = writeln!(out, "{y}");
            }
        }
    }
    out
}

pub fn read_samples(path: &Path) -> Result<SampleFile> {
    parse_samples(&read(path)?, path)
}

pub fn parse_samples(text: &str, path: &Path) -> Result<SampleFile> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CliError::format(path, 1, "empty sample file"))?;
    let toks: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    if toks.len() < 3 || toks[0] != "space" {
        return Err(CliError::format(path, 1, "expected '# space <kind> <param> [seed <seed>]'"));
    }
    let space = parse_space(&format!("{}:{}", toks[1], toks[2])).map_err(|e| CliError::format(path, 1, e.to_string()))?;
    let seed = match toks.get(3..) {
        Some(["seed", s]) => Some(s.parse().map_err(|_| CliError::format(path, 1, format!("bad seed '{s}'")))?),
        Some([]) | None => None,
        Some(_) => return Err(CliError::format(path, 1, "unexpected header tokens")),
    };
    let mut points = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| CliError::format(path, i + 1, msg);
        let y = match space.hypercube_dim() {
            Some(dim) => {
                let signs: Vec<i8> = line
                    .split_whitespace()
                    .map(|t| match t {
                        "1" | "+1" => Ok(1),
                        "-1" => Ok(-1),
                        other => Err(bad(format!("expected ±1, got '{other}'"))),
                    })
                    .collect::<Result<_>>()?;
                if signs.len() != dim {
                    return Err(bad(format!("expected {dim} entries, got {}", signs.len())));
                }
                space.index_of_signs(&signs)?
            }
            None => {
                let y: usize = line.parse().map_err(|_| bad(format!("expected a point index, got '{line}'")))?;
                space.check_point(y).map_err(|e| bad(e.to_string()))?;
                y
            }
        };
        points.push(y);
    }
    Ok(SampleFile { space, seed, points })
}

/// Persisted model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelDoc {
    Boltzmann {
        #[serde(rename = "D")]
        dim: usize,
        upper: Vec<f64>,
    },
    Conditional {
        #[serde(rename = "L")]
        labels: usize,
        d: usize,
        theta: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        gauge: bool,
    },
    Tabular {
        space: String,
        eta: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Boltzmann(BoltzmannModel),
    Conditional(ConditionalModel),
    Tabular(TabularModel),
}

impl AnyModel {
    pub fn to_doc(&self) -> ModelDoc {
        use localscore_core::UnnormalizedModel;
        match self {
            AnyModel::Boltzmann(m) => ModelDoc::Boltzmann {
                dim: m.dim(),
                upper: m.upper().to_vec(),
            },
            AnyModel::Conditional(m) => ModelDoc::Conditional {
                labels: m.labels(),
                d: m.features(),
                theta: (0..m.labels()).map(|y| m.theta(y).to_vec()).collect(),
                gauge: m.gauge(),
            },
            AnyModel::Tabular(m) => {
                let (kind, param) = m.space().header();
                ModelDoc::Tabular {
                    space: format!("{kind}:{param}"),
                    eta: m.params().to_vec(),
                }
            }
        }
    }

    pub fn from_doc(doc: ModelDoc) -> Result<Self> {
        Ok(match doc {
            ModelDoc::Boltzmann { dim, upper } => AnyModel::Boltzmann(BoltzmannModel::from_upper(dim, upper)?),
            ModelDoc::Conditional { labels, d, theta, gauge } => {
                if theta.len() != labels {
                    return Err(CliError::Usage(format!("theta has {} rows, expected L={labels}", theta.len())));
                }
                let flat: Vec<f64> = theta.into_iter().flatten().collect();
                let m = ConditionalModel::new(labels, d, flat)?;
                AnyModel::Conditional(if gauge { m.with_gauge(true) } else { m })
            }
            ModelDoc::Tabular { space, eta } => AnyModel::Tabular(TabularModel::new(parse_space(&space)?, eta)?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Boltzmann(_) => "boltzmann",
            AnyModel::Conditional(_) => "conditional",
            AnyModel::Tabular(_) => "tabular",
        }
    }
}

pub fn model_to_string(model: &AnyModel) -> Result<String> {
    Ok(serde_json::to_string(&model.to_doc())?)
}

pub fn parse_model(text: &str) -> Result<AnyModel> {
    AnyModel::from_doc(serde_json::from_str(text)?)
}

pub fn read_model(path: &Path) -> Result<AnyModel> {
    parse_model(&read(path)?)
}

pub fn write_model(path: &Path, model: &AnyModel) -> Result<()> {
    write_text(path, &(model_to_string(model)? + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use localscore_core::graph::hamming_graph;
    use localscore_core::UnnormalizedModel;

    #[test]
    fn space_specs() {
        assert_eq!(parse_space("hypercube:3").unwrap().size(), 8);
        assert_eq!(parse_space("labels 10").unwrap().size(), 10);
        assert!(parse_space("cube:3").is_err());
        assert!(parse_space("hypercube").is_err());
    }

    #[test]
    fn graph_round_trip() {
        let g = hamming_graph(3, 2).unwrap();
        let text = graph_to_string(&g);
        assert!(text.starts_with("space hypercube 3\n"));
        assert_eq!(parse_graph(&text, Path::new("g")).unwrap(), g);
        let err = parse_graph("space labels 3\n0 x\n", Path::new("g")).unwrap_err();
        assert!(err.to_string().contains("g:2"));
        assert!(parse_graph("0 1\n", Path::new("g")).is_err());
        assert!(parse_graph("space labels 3\n1 1\n", Path::new("g")).is_err());
    }

    #[test]
    fn sample_round_trip() {
        let f = SampleFile {
            space: SampleSpace::hypercube(3).unwrap(),
            seed: Some(42),
            points: vec![0, 5, 7],
        };
        let text = samples_to_string(&f);
        assert!(text.starts_with("# space hypercube 3 seed 42\n-1 -1 -1\n1 -1 1\n"));
        assert_eq!(parse_samples(&text, Path::new("s")).unwrap(), f);
        let labels = SampleFile {
            space: SampleSpace::labels(10).unwrap(),
            seed: None,
            points: vec![3, 9],
        };
        assert_eq!(parse_samples(&samples_to_string(&labels), Path::new("s")).unwrap(), labels);
        let err = parse_samples("# space hypercube 2\n1 0\n", Path::new("s")).unwrap_err();
        assert!(err.to_string().contains("s:2"));
    }

    #[test]
    fn model_round_trip_is_exact() {
        let upper = vec![0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, 0.7];
        let m = AnyModel::Boltzmann(BoltzmannModel::from_upper(4, upper).unwrap());
        let text = model_to_string(&m).unwrap();
        assert!(text.starts_with("{\"kind\":\"boltzmann\",\"D\":4,\"upper\":["));
        assert_eq!(parse_model(&text).unwrap(), m);

        let c = AnyModel::Conditional(ConditionalModel::new(2, 2, vec![0.1, 0.2, 0.3, 1.0 / 7.0]).unwrap());
        let text = model_to_string(&c).unwrap();
        assert!(text.contains("\"L\":2") && text.contains("\"theta\":[["));
        assert_eq!(parse_model(&text).unwrap(), c);

        let t = AnyModel::Tabular(TabularModel::new(SampleSpace::labels(3).unwrap(), vec![0.0, 1.0, 2.0]).unwrap());
        assert_eq!(parse_model(&model_to_string(&t).unwrap()).unwrap(), t);
        if let AnyModel::Tabular(m) = &t {
            assert_eq!(m.params().len(), 3);
        }
        assert!(parse_model("{\"kind\":\"boltzmann\",\"D\":3,\"upper\":[1]}").is_err());
    }
}
