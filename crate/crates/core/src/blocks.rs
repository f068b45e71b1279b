//! Block systems `A₁..A_m` over hypercube coordinates and the neighborhoods
//! they induce for composite likelihood.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::graph::{derived_graph_n, NeighborhoodGraph, UndirectedGraph};
use crate::space::{SampleSpace, MAX_HYPERCUBE_DIM};

/// Nonempty coordinate subsets of `{1..D}`, stored as bit masks (coordinate
/// `i` is bit `i - 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSystem {
    dim: usize,
    masks: Vec<usize>,
}

impl BlockSystem {
    /// Blocks given as 1-based coordinate lists.
    pub fn new(dim: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        if dim == 0 || dim > MAX_HYPERCUBE_DIM {
            return Err(Error::InvalidInput(format!("invalid block dimension {dim}")));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidInput("a block system needs at least one block".into()));
        }
        let mut masks = Vec::with_capacity(blocks.len());
        for block in blocks {
            if block.is_empty() {
                return Err(Error::InvalidInput("blocks must be nonempty".into()));
            }
            let mut mask = 0usize;
            for &i in block {
                if i == 0 || i > dim {
                    return Err(Error::InvalidInput(format!(
                        "block index {i} outside 1..={dim}"
                    )));
                }
                mask |= 1 << (i - 1);
            }
            masks.push(mask);
        }
        Ok(Self { dim, masks })
    }

    /// Singletons `{1}, …, {D}`: the pseudo-likelihood block system.
    pub fn singletons(dim: usize) -> Result<Self> {
        let blocks: Vec<Vec<usize>> = (1..=dim).map(|i| vec![i]).collect();
        Self::new(dim, &blocks)
    }

    /// Parses `1,2;3,4` style block lists.
    pub fn parse(dim: usize, text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in text.split(';') {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::Parse(format!("empty block in '{text}'")));
            }
            let mut block = Vec::new();
            for tok in part.split(',') {
                let i: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad block index '{tok}'")))?;
                block.push(i);
            }
            blocks.push(block);
        }
        Self::new(dim, &blocks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_count(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[usize] {
        &self.masks
    }

    /// 1-based coordinate lists.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        self.masks
            .iter()
            .map(|&m| (0..self.dim).filter(|i| m >> i & 1 == 1).map(|i| i + 1).collect())
            .collect()
    }

    pub fn space(&self) -> SampleSpace {
        SampleSpace::hypercube(self.dim).expect("dimension validated at construction")
    }

    /// Whether `∪ A_ℓ = {1..D}`.
    pub fn covers_all_coordinates(&self) -> bool {
        let all = if self.dim == usize::BITS as usize { usize::MAX } else { (1usize << self.dim) - 1 };
        self.masks.iter().fold(0, |acc, m| acc | m) == all
    }

    /// Whether the blocks partition `{1..D}` (cover and pairwise disjoint).
    pub fn is_disjoint_cover(&self) -> bool {
        let mut seen = 0usize;
        for &m in &self.masks {
            if seen & m != 0 {
                return false;
            }
            seen |= m;
        }
        self.covers_all_coordinates()
    }

    /// `b_ℓ(y) = {z ≠ y : z agrees with y off A_ℓ}`, sorted.
    pub fn block_neighbors(&self, y: usize, block: usize) -> Vec<usize> {
        let mask = self.masks[block];
        let mut out = Vec::with_capacity((1 << mask.count_ones()) - 1);
        // enumerate nonempty submasks
        let mut sub = mask;
        while sub != 0 {
            out.push(y ^ sub);
            sub = (sub - 1) & mask;
        }
        out.sort_unstable();
        out
    }

    /// `b(y) = ∪_ℓ b_ℓ(y)`, sorted.
    pub fn neighbors(&self, y: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.masks.len())
            .flat_map(|l| self.block_neighbors(y, l))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether `y` and `z` agree off some block.
    pub fn is_adjacent(&self, y: usize, z: usize) -> bool {
        let diff = y ^ z;
        diff != 0 && self.masks.iter().any(|&m| diff & !m == 0)
    }
}

impl fmt::Display for BlockSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks()
            .iter()
            .map(|b| b.iter().map(|i| format!("{i}")).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// Materialized composite-likelihood neighborhood.
#[derive(Debug, Clone)]
pub struct ClNeighborhood {
    pub graph: NeighborhoodGraph,
    /// `block_neighbors[y][ℓ] = b_ℓ(y)`.
    pub block_neighbors: Vec<Vec<Vec<usize>>>,
}

pub fn cl_neighborhood(blocks: &BlockSystem) -> Result<ClNeighborhood> {
    let space = blocks.space();
    space.ensure_enumerable()?;
    let n = space.size();
    let block_neighbors: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|y| (0..blocks.block_count()).map(|l| blocks.block_neighbors(y, l)).collect())
        .collect();
    let adj = (0..n).map(|y| blocks.neighbors(y)).collect();
    let graph = NeighborhoodGraph::new(space, UndirectedGraph::from_adjacency(adj)?)?;
    Ok(ClNeighborhood {
        graph,
        block_neighbors,
    })
}

/// Connectivity of `G₀` over `Y₀ = Y` agrees with `∪ A_ℓ = {1..D}`.
pub fn cl_connectivity_matches_cover(blocks: &BlockSystem) -> Result<bool> {
    let cl = cl_neighborhood(blocks)?;
    let all: Vec<usize> = (0..cl.graph.space().size()).collect();
    let connected = derived_graph_n(&cl.graph, &all)?.is_connected();
    Ok(connected == blocks.covers_all_coordinates())
}

/// Whether the `|b(y)| × m` indicator matrix `(1_{b_1(y)}, …, 1_{b_m(y)})`
/// has full row rank `|b(y)|`, decided in exact integer arithmetic.
pub fn rank_condition(blocks: &BlockSystem, y: usize) -> Result<bool> {
    blocks.space().check_point(y)?;
    let rows = blocks.neighbors(y);
    let m = blocks.block_count();
    if rows.len() > m {
        return Ok(false);
    }
    let matrix: Vec<Vec<i128>> = rows
        .iter()
        .map(|&z| {
            (0..m)
                .map(|l| {
                    let diff = y ^ z;
                    i128::from(diff & !blocks.masks[l] == 0)
                })
                .collect()
        })
        .collect();
    Ok(integer_rank(matrix) == rows.len())
}

/// Rank by fraction-free (Bareiss) elimination.
pub fn integer_rank(mut a: Vec<Vec<i128>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev;
            }
            a[r][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use crate::graph::hamming_graph;

    #[test]
    fn singleton_blocks_give_radius_one_cube() {
        let b = BlockSystem::parse(3, "1;2;3").unwrap();
        let cl = cl_neighborhood(&b).unwrap();
        assert_eq!(cl.graph, hamming_graph(3, 1).unwrap());
        for y in 0..8 {
            assert!(cl.block_neighbors[y].iter().all(|bl| bl.len() == 1));
        }
    }

    #[test]
    fn partial_cover_disconnects() {
        let b = BlockSystem::parse(3, "1;2").unwrap();
        let cl = cl_neighborhood(&b).unwrap();
        assert!((0..8).all(|y| cl.graph.neighbors(y).len() == 2));
        assert!(!cl.graph.is_connected());
        assert!(!b.covers_all_coordinates());
    }

    #[test]
    fn full_block_gives_complete_graph() {
        let b = BlockSystem::parse(2, "1,2").unwrap();
        let cl = cl_neighborhood(&b).unwrap();
        assert_eq!(cl.graph.edge_count(), 6);
        assert_eq!(cl.block_neighbors[0][0].len(), 3);
    }

    #[test]
    fn block_sizes() {
        let b = BlockSystem::parse(4, "1,2,3;2,4").unwrap();
        for y in 0..16 {
            assert_eq!(b.block_neighbors(y, 0).len(), 7);
            assert_eq!(b.block_neighbors(y, 1).len(), 3);
            for z in b.neighbors(y) {
                assert!(b.is_adjacent(y, z));
            }
        }
    }

    #[test]
    fn block_cover_examples() {
        for spec in ["1;2;3", "1;2", "1,2;3", "2"] {
            let b = BlockSystem::parse(3, spec).unwrap();
            assert!(cl_connectivity_matches_cover(&b).unwrap(), "{spec}");
        }
        let b = BlockSystem::parse(2, "1,2").unwrap();
        assert!(cl_connectivity_matches_cover(&b).unwrap());
    }

    #[test]
    fn rank_condition_examples() {
        let b = BlockSystem::parse(3, "1;2").unwrap();
        let c = BlockSystem::parse(3, "1;2,3").unwrap();
        let d = BlockSystem::parse(2, "1;2").unwrap();
        for y in 0..8 {
            assert!(rank_condition(&b, y).unwrap());
            assert!(!rank_condition(&c, y).unwrap());
        }
        assert!(rank_condition(&d, 0).unwrap());
    }

    #[test]
    fn even_split_family_rank() {
        // {1},{3} with {1,2},{3,4}: b(y) has 6 points but only 4 blocks
        let b = BlockSystem::parse(4, "1;3;1,2;3,4").unwrap();
        assert_eq!(b.neighbors(5).len(), 6);
        assert!(!rank_condition(&b, 5).unwrap());
        let d = BlockSystem::parse(2, "1;2").unwrap();
        assert!((0..4).all(|y| rank_condition(&d, y).unwrap()));
    }

    #[test]
    fn integer_rank_cases() {
        assert_eq!(integer_rank(vec![vec![1, 0], vec![0, 1]]), 2);
        assert_eq!(integer_rank(vec![vec![1, 1], vec![1, 1]]), 1);
        assert_eq!(integer_rank(vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]), 3);
        assert_eq!(integer_rank(vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 2, 1]]), 2);
        assert_eq!(integer_rank(vec![vec![0, 0], vec![0, 0]]), 0);
    }

    #[test]
    fn parse_errors() {
        assert!(BlockSystem::parse(3, "1;;2").is_err());
        assert!(BlockSystem::parse(3, "4").is_err());
        assert!(BlockSystem::parse(3, "a").is_err());
        assert_eq!(BlockSystem::parse(3, "1,2;3").unwrap().to_string(), "1,2;3");
    }
}
