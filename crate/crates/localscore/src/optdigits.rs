//! Reader for the UCI optical handwritten digits files: comma-separated
//! integer rows of 64 features in `0..=16` followed by a label in `0..=9`.
//!
//! Which features to keep is the caller's choice; the reader takes explicit
//! column indices.

use std::path::Path;

use localscore_core::estimation::LabeledData;
use localscore_core::sampling::RngStream;

use crate::error::{CliError, Result};

pub const LABELS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Digits {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Digits {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn to_labeled(&self) -> Result<LabeledData> {
        Ok(LabeledData::new(self.feature_count(), self.features.clone(), self.labels.clone())?)
    }

    /// Binarized rows as hypercube point indices (feature `i` is bit `i`).
    pub fn hypercube_points(&self) -> Result<Vec<usize>> {
        let dim = self.feature_count();
        if dim == 0 || dim > 62 {
            return Err(CliError::Usage(format!("cannot map {dim} features onto a hypercube")));
        }
        self.features
            .iter()
            .map(|row| {
                row.iter().enumerate().try_fold(0usize, |acc, (i, &v)| match v {
                    v if v == 1.0 => Ok(acc | 1 << i),
                    v if v == -1.0 => Ok(acc),
                    _ => Err(CliError::Usage("features are not binarized".into())),
                })
            })
            .collect()
    }
}

pub fn ingest(path: &Path, feature_indices: Option<&[usize]>, binarize: bool) -> Result<Digits> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path, feature_indices, binarize)
}

/// Parses rows; `binarize` maps 0 to −1 and 1..=16 to +1.
pub fn parse(text: &str, path: &Path, feature_indices: Option<&[usize]>, binarize: bool) -> Result<Digits> {
    let mut out = Digits {
        features: Vec::new(),
        labels: Vec::new(),
    };
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let values: Vec<i64> = line
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::format(path, lineno, "row must be comma-separated integers"))?;
        if values.len() < 2 {
            return Err(CliError::format(path, lineno, "row needs features and a label"));
        }
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(CliError::format(path, lineno, "row length differs from the first row"));
        }
        let (label, feats) = values.split_last().expect("nonempty");
        let label = usize::try_from(*label)
            .ok()
            .filter(|&l| l < LABELS)
            .ok_or_else(|| CliError::format(path, lineno, format!("label {label} outside 0..=9")))?;
        let pick = |k: usize| -> Result<f64> {
            let v = *feats.get(k).ok_or_else(|| {
                CliError::format(path, lineno, format!("feature index {k} out of range (row has {})", feats.len()))
            })?;
            if !(0..=16).contains(&v) {
                return Err(CliError::format(path, lineno, format!("feature value {v} outside 0..=16")));
            }
            Ok(match (binarize, v) {
                (false, v) => v as f64,
                (true, 0) => -1.0,
                (true, _) => 1.0,
            })
        };
        let row = match feature_indices {
            Some(idx) => idx.iter().map(|&k| pick(k)).collect::<Result<Vec<_>>>()?,
            None => (0..feats.len()).map(pick).collect::<Result<Vec<_>>>()?,
        };
        out.features.push(row);
        out.labels.push(label);
    }
    if out.is_empty() {
        return Err(CliError::format(path, 1, "no data rows"));
    }
    Ok(out)
}

/// Picks exactly `⌊ρn⌋` distinct rows and redraws their labels uniformly
/// over `0..labels`. Returns the chosen row indices, sorted.
pub fn inject_label_noise(labels: &mut [usize], rate: f64, num_labels: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(CliError::Usage(format!("noise rate must lie in [0, 1], got {rate}")));
    }
    let n = labels.len();
    let k = (rate * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    // partial Fisher–Yates
    for i in 0..k {
        let j = i + rng.below(n - i);
        order.swap(i, j);
    }
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    for &i in &chosen {
        labels[i] = rng.below(num_labels);
    }
    Ok(chosen)
}

/// Random split into `n_train` training rows and the rest for testing.
pub fn split(n: usize, n_train: usize, rng: &mut RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train == 0 || n_train >= n {
        return Err(CliError::Usage(format!("n_train must lie in 1..{n}, got {n_train}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.below(i + 1));
    }
    let test = order.split_off(n_train);
    Ok((order, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarization_rule() {
        let d = parse("0,5,16,3\n2,0,0,7\n", Path::new("d"), Some(&[0, 1]), true).unwrap();
        assert_eq!(d.features[0], vec![-1.0, 1.0]);
        assert_eq!(d.features[1], vec![1.0, -1.0]);
        assert_eq!(d.labels, vec![3, 7]);
        assert_eq!(d.hypercube_points().unwrap(), vec![2, 1]);
        let raw = parse("0,5,16,3\n", Path::new("d"), None, false).unwrap();
        assert_eq!(raw.features[0], vec![0.0, 5.0, 16.0]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let e = parse("0,1,2\n0,x,2\n", Path::new("d"), None, false).unwrap_err();
        assert!(e.to_string().contains("d:2"), "{e}");
        assert!(parse("0,1,12\n", Path::new("d"), None, false).is_err());
        assert!(parse("0,1,2\n", Path::new("d"), Some(&[5]), false).is_err());
        assert!(parse("0,1,2\n0,1\n", Path::new("d"), None, false).is_err());
    }

    #[test]
    fn label_noise_is_exact_count() {
        let mut labels = vec![0usize; 1000];
        let chosen = inject_label_noise(&mut labels, 0.1, 10, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(chosen.len(), 100);
        assert!(chosen.windows(2).all(|w| w[0] < w[1]));
        assert!(labels.iter().enumerate().all(|(i, &l)| l == 0 || chosen.binary_search(&i).is_ok()));
        let mut again = vec![0usize; 1000];
        inject_label_noise(&mut again, 0.1, 10, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(labels, again);
        assert_eq!(inject_label_noise(&mut [0; 7], 0.2, 10, &mut RngStream::new(1, 0)).unwrap().len(), 1);
    }

    #[test]
    fn split_partitions_rows() {
        let (train, test) = split(10, 7, &mut RngStream::new(3, 0)).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split(10, 10, &mut RngStream::new(3, 0)).is_err());
    }
}
