//! Neighbor generators used by score evaluation. Hypercube neighborhoods are
//! produced on demand so scores never enumerate the space.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::blocks::{cl_neighborhood, BlockSystem};
use crate::error::{Error, Result};
use crate::graph::{hamming_masks, NeighborhoodGraph, UndirectedGraph};
use crate::space::{hamming_distance_index, SampleSpace};

#[derive(Debug, Clone)]
pub enum Locality {
    /// Explicit adjacency lists.
    Graph(Arc<NeighborhoodGraph>),
    /// Hamming ball of the given radius on `{±1}^D`, generated on demand.
    Hamming {
        dim: usize,
        radius: usize,
        masks: Arc<Vec<usize>>,
    },
    /// Composite-likelihood blocks on `{±1}^D`.
    Blocks(BlockSystem),
}

impl Locality {
    pub fn graph(g: NeighborhoodGraph) -> Self {
        Locality::Graph(Arc::new(g))
    }

    pub fn hamming(dim: usize, radius: usize) -> Result<Self> {
        SampleSpace::hypercube(dim)?;
        if radius == 0 || radius > dim {
            return Err(Error::InvalidInput(format!(
                "radius must be in 1..={dim}, got {radius}"
            )));
        }
        Ok(Locality::Hamming {
            dim,
            radius,
            masks: Arc::new(hamming_masks(dim, radius)),
        })
    }

    pub fn blocks(blocks: BlockSystem) -> Self {
        Locality::Blocks(blocks)
    }

    pub fn space(&self) -> SampleSpace {
        match self {
            Locality::Graph(g) => g.space().clone(),
            Locality::Hamming { dim, .. } => SampleSpace::hypercube(*dim).expect("validated"),
            Locality::Blocks(b) => b.space(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Locality::Graph(g) => g.space().size(),
            Locality::Hamming { dim, .. } => 1 << dim,
            Locality::Blocks(b) => 1 << b.dim(),
        }
    }

    /// Writes the sorted adjacency `b(y)` into `out` (cleared first).
    pub fn neighbors_into(&self, y: usize, out: &mut Vec<usize>) {
        out.clear();
        match self {
            Locality::Graph(g) => out.extend_from_slice(g.neighbors(y)),
            Locality::Hamming { masks, .. } => {
                out.extend(masks.iter().map(|m| y ^ m));
                out.sort_unstable();
            }
            Locality::Blocks(b) => out.extend(b.neighbors(y)),
        }
    }

    pub fn neighbors(&self, y: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.neighbors_into(y, &mut out);
        out
    }

    pub fn is_adjacent(&self, y: usize, z: usize) -> bool {
        match self {
            Locality::Graph(g) => g.is_adjacent(y, z),
            Locality::Hamming { radius, .. } => {
                let d = hamming_distance_index(y, z);
                d >= 1 && d <= *radius
            }
            Locality::Blocks(b) => b.is_adjacent(y, z),
        }
    }

    /// Number of composite-likelihood blocks per point.
    pub fn block_count(&self) -> usize {
        match self {
            Locality::Blocks(b) => b.block_count(),
            _ => 1,
        }
    }

    /// Writes `b_ℓ(y)` for each block `ℓ`. Outside of block systems there is
    /// a single block equal to `b(y)`.
    pub fn blocks_into(&self, y: usize, out: &mut Vec<Vec<usize>>) {
        out.clear();
        match self {
            Locality::Blocks(b) => {
                for l in 0..b.block_count() {
                    out.push(b.block_neighbors(y, l));
                }
            }
            _ => out.push(self.neighbors(y)),
        }
    }

    /// Whether `y ∈ b_ℓ(z)`.
    pub fn in_block(&self, z: usize, block: usize, y: usize) -> bool {
        match self {
            Locality::Blocks(b) => {
                let diff = y ^ z;
                diff != 0 && diff & !b.masks()[block] == 0
            }
            _ => block == 0 && self.is_adjacent(z, y),
        }
    }

    /// Explicit graph; requires an enumerable space.
    pub fn materialize(&self) -> Result<NeighborhoodGraph> {
        match self {
            Locality::Graph(g) => Ok((**g).clone()),
            Locality::Hamming { dim, radius, .. } => crate::graph::hamming_graph(*dim, *radius),
            Locality::Blocks(b) => Ok(cl_neighborhood(b)?.graph),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Locality::Graph(g) => format!("graph({}, {} edges)", g.space(), g.edge_count()),
            Locality::Hamming { dim, radius, .. } => format!("hamming(dim={dim}, radius={radius})"),
            Locality::Blocks(b) => format!("blocks(dim={}, {})", b.dim(), b),
        }
    }
}

impl From<NeighborhoodGraph> for Locality {
    fn from(g: NeighborhoodGraph) -> Self {
        Locality::graph(g)
    }
}

/// Builds an explicit graph from any locality, checking symmetry.
pub fn to_undirected(loc: &Locality) -> Result<UndirectedGraph> {
    loc.space().ensure_enumerable()?;
    let adj = (0..loc.size()).map(|y| loc.neighbors(y)).collect();
    UndirectedGraph::from_adjacency(adj)
}
