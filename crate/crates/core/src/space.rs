//! Finite sample spaces with a dense point indexing.
//!
//! Every point carries an index in `0..size`. Hypercube points `{±1}^D` are
//! indexed by their binary encoding: coordinate `i` (0-based) contributes bit
//! `i`, with `-1 ↦ 0` and `+1 ↦ 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Largest space that may be enumerated in full (potentials, divergences,
/// normalization, explicit graphs).
pub const ENUMERATION_LIMIT: usize = 1 << 16;

/// Largest supported hypercube dimension.
pub const MAX_HYPERCUBE_DIM: usize = 62;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpaceKind {
    Enumerated(Vec<String>),
    Hypercube { dim: usize },
    LabelRange { labels: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSpace {
    kind: SpaceKind,
}

impl SampleSpace {
    pub fn enumerated(ids: Vec<String>) -> Result<Self> {
        if ids.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "an enumerated space needs at least 2 points, got {}",
                ids.len()
            )));
        }
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate point identifiers".into()));
        }
        Ok(Self {
            kind: SpaceKind::Enumerated(ids),
        })
    }

    pub fn hypercube(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_HYPERCUBE_DIM {
            return Err(Error::InvalidInput(format!(
                "hypercube dimension must be in 1..={MAX_HYPERCUBE_DIM}, got {dim}"
            )));
        }
        Ok(Self {
            kind: SpaceKind::Hypercube { dim },
        })
    }

    pub fn labels(labels: usize) -> Result<Self> {
        if labels < 2 {
            return Err(Error::InvalidInput(format!(
                "a label range needs at least 2 labels, got {labels}"
            )));
        }
        Ok(Self {
            kind: SpaceKind::LabelRange { labels },
        })
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn size(&self) -> usize {
        match &self.kind {
            SpaceKind::Enumerated(ids) => ids.len(),
            SpaceKind::Hypercube { dim } => 1usize << dim,
            SpaceKind::LabelRange { labels } => *labels,
        }
    }

    pub fn hypercube_dim(&self) -> Option<usize> {
        match self.kind {
            SpaceKind::Hypercube { dim } => Some(dim),
            _ => None,
        }
    }

    pub fn is_enumerable(&self) -> bool {
        self.size() <= ENUMERATION_LIMIT
    }

    pub fn ensure_enumerable(&self) -> Result<()> {
        if self.is_enumerable() {
            Ok(())
        } else {
            Err(Error::SpaceTooLarge {
                size: self.size(),
                limit: ENUMERATION_LIMIT,
            })
        }
    }

    pub fn check_point(&self, y: usize) -> Result<()> {
        if y < self.size() {
            Ok(())
        } else {
            Err(Error::PointOutOfRange {
                point: y,
                size: self.size(),
            })
        }
    }

    /// Short kind name and parameter, as used in file headers.
    pub fn header(&self) -> (&'static str, usize) {
        match &self.kind {
            SpaceKind::Enumerated(ids) => ("enumerated", ids.len()),
            SpaceKind::Hypercube { dim } => ("hypercube", *dim),
            SpaceKind::LabelRange { labels } => ("labels", *labels),
        }
    }

    /// Sign vector of a hypercube point.
    pub fn signs(&self, y: usize) -> Result<Vec<i8>> {
        let dim = self
            .hypercube_dim()
            .ok_or_else(|| Error::Unsupported("sign vectors exist only on hypercubes".into()))?;
        self.check_point(y)?;
        Ok(index_to_signs(y, dim))
    }

    /// Dense index of a hypercube sign vector.
    pub fn index_of_signs(&self, signs: &[i8]) -> Result<usize> {
        let dim = self
            .hypercube_dim()
            .ok_or_else(|| Error::Unsupported("sign vectors exist only on hypercubes".into()))?;
        if signs.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: signs.len(),
            });
        }
        signs_to_index(signs)
    }

    /// Human-readable name of a point.
    pub fn point_name(&self, y: usize) -> String {
        match &self.kind {
            SpaceKind::Enumerated(ids) => ids.get(y).cloned().unwrap_or_else(|| format!("#{y}")),
            SpaceKind::Hypercube { dim } => {
                let s: Vec<String> = index_to_signs(y, *dim)
                    .iter()
                    .map(|&v| if v > 0 { "+1".into() } else { "-1".into() })
                    .collect();
                format!("({})", s.join(","))
            }
            SpaceKind::LabelRange { .. } => format!("{y}"),
        }
    }
}

impl fmt::Display for SampleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, param) = self.header();
        write!(f, "{kind} {param}")
    }
}

pub fn index_to_signs(y: usize, dim: usize) -> Vec<i8> {
    (0..dim)
        .map(|i| if (y >> i) & 1 == 1 { 1 } else { -1 })
        .collect()
}

pub fn signs_to_index(signs: &[i8]) -> Result<usize> {
    let mut idx = 0usize;
    for (i, &s) in signs.iter().enumerate() {
        match s {
            1 => idx |= 1 << i,
            -1 => {}
            other => {
                return Err(Error::InvalidInput(format!(
                    "hypercube coordinates must be ±1, got {other}"
                )))
            }
        }
    }
    Ok(idx)
}

/// Number of coordinates at which two sign vectors differ.
pub fn hamming_distance(y: &[i8], z: &[i8]) -> Result<usize> {
    if y.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: z.len(),
        });
    }
    for &v in y.iter().chain(z.iter()) {
        if v != 1 && v != -1 {
            return Err(Error::InvalidInput(format!(
                "hypercube coordinates must be ±1, got {v}"
            )));
        }
    }
    Ok(y.iter().zip(z).filter(|(a, b)| a != b).count())
}

/// Hamming distance between two dense hypercube indices.
#[inline]
pub fn hamming_distance_index(y: usize, z: usize) -> usize {
    (y ^ z).count_ones() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance(&[1, 1], &[1, 1]).unwrap(), 0);
        assert_eq!(hamming_distance(&[1, 1], &[-1, -1]).unwrap(), 2);
        assert_eq!(hamming_distance(&[1, -1, 1], &[1, 1, 1]).unwrap(), 1);
    }

    #[test]
    fn hamming_rejects_mismatch() {
        assert!(matches!(
            hamming_distance(&[1, 1], &[1, 1, 1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(hamming_distance(&[1, 0], &[1, 1]).is_err());
    }

    #[test]
    fn sign_encoding_round_trip() {
        let space = SampleSpace::hypercube(3).unwrap();
        for y in 0..8 {
            let s = space.signs(y).unwrap();
            assert_eq!(space.index_of_signs(&s).unwrap(), y);
        }
        // coordinate 1 is the least significant bit
        assert_eq!(space.index_of_signs(&[1, -1, -1]).unwrap(), 1);
        assert_eq!(space.signs(0).unwrap(), vec![-1, -1, -1]);
    }

    #[test]
    fn space_invariants() {
        assert_eq!(SampleSpace::hypercube(4).unwrap().size(), 16);
        assert_eq!(SampleSpace::labels(10).unwrap().size(), 10);
        assert!(SampleSpace::labels(1).is_err());
        assert!(SampleSpace::hypercube(0).is_err());
        assert!(SampleSpace::enumerated(vec!["a".into(), "a".into()]).is_err());
        assert!(!SampleSpace::hypercube(20).unwrap().is_enumerable());
    }
}
