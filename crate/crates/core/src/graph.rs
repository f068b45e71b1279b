//! Neighborhood graphs over sample spaces, the derived graphs used by the
//! coincidence theorems, and connectivity utilities.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::space::{hamming_distance_index, SampleSpace};

/// Plain undirected simple graph on vertices `0..n` with sorted adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    pub fn empty(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    /// Builds a graph from an edge list; duplicates and either orientation
    /// are accepted, self loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::PointOutOfRange {
                    point: a.max(b),
                    size: n,
                });
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self loop at vertex {a}")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adj })
    }

    /// Wraps adjacency lists after checking symmetry and loop freedom.
    pub fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Result<Self> {
        let n = adj.len();
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if let Some(&w) = list.iter().find(|&&w| w >= n) {
                return Err(Error::PointOutOfRange { point: w, size: n });
            }
            if list.binary_search(&v).is_ok() {
                return Err(Error::InvalidInput(format!("self loop at vertex {v}")));
            }
        }
        let g = Self { adj };
        for v in 0..n {
            for &w in &g.adj[v] {
                if !g.has_edge(w, v) {
                    return Err(Error::InvalidInput(format!(
                        "adjacency is not symmetric: {v} -> {w} without {w} -> {v}"
                    )));
                }
            }
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj
            .get(a)
            .is_some_and(|list| list.binary_search(&b).is_ok())
    }

    /// Edges as `(min, max)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(v, list)| list.iter().filter(move |&&w| w > v).map(move |&w| (v, w)))
    }

    /// Connected components, each sorted, ordered by their smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.clear();
            queue.push(start);
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head];
                head += 1;
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
            let mut comp = queue.clone();
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// A graph with at most one vertex counts as connected.
    pub fn is_connected(&self) -> bool {
        self.adj.len() <= 1 || self.components().len() == 1
    }
}

/// Symmetric, loop-free adjacency `b(y)` over a sample space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodGraph {
    space: SampleSpace,
    graph: UndirectedGraph,
}

impl NeighborhoodGraph {
    pub fn new(space: SampleSpace, graph: UndirectedGraph) -> Result<Self> {
        if graph.vertex_count() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                found: graph.vertex_count(),
            });
        }
        Ok(Self { space, graph })
    }

    pub fn from_edges(space: SampleSpace, edges: &[(usize, usize)]) -> Result<Self> {
        space.ensure_enumerable()?;
        let graph = UndirectedGraph::from_edges(space.size(), edges)?;
        Ok(Self { space, graph })
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    /// Sorted adjacency `b(y)`.
    pub fn neighbors(&self, y: usize) -> &[usize] {
        self.graph.neighbors(y)
    }

    pub fn is_adjacent(&self, y: usize, z: usize) -> bool {
        self.graph.has_edge(y, z)
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.graph.edges()
    }

    pub fn is_connected(&self) -> bool {
        self.graph.is_connected()
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        self.graph.components()
    }
}

impl fmt::Display for NeighborhoodGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "graph on {} ({} points, {} edges)",
            self.space,
            self.space.size(),
            self.edge_count()
        )
    }
}

/// Hypercube `{±1}^D` with `y ~ z` iff `1 <= d_H(y, z) <= radius`.
pub fn hamming_graph(dim: usize, radius: usize) -> Result<NeighborhoodGraph> {
    if radius == 0 || radius > dim {
        return Err(Error::InvalidInput(format!(
            "radius must be in 1..={dim}, got {radius}"
        )));
    }
    let space = SampleSpace::hypercube(dim)?;
    space.ensure_enumerable()?;
    let masks = hamming_masks(dim, radius);
    let adj = (0..space.size())
        .map(|y| {
            let mut list: Vec<usize> = masks.iter().map(|m| y ^ m).collect();
            list.sort_unstable();
            list
        })
        .collect();
    NeighborhoodGraph::new(space, UndirectedGraph { adj })
}

/// All bit masks over `dim` bits with popcount in `1..=radius`.
pub fn hamming_masks(dim: usize, radius: usize) -> Vec<usize> {
    let mut out = Vec::new();
    fn rec(start: usize, dim: usize, left: usize, acc: usize, out: &mut Vec<usize>) {
        for i in start..dim {
            let m = acc | (1 << i);
            out.push(m);
            if left > 1 {
                rec(i + 1, dim, left - 1, m, out);
            }
        }
    }
    if radius > 0 {
        rec(0, dim, radius, 0, &mut out);
    }
    out.sort_unstable();
    debug_assert!(out
        .iter()
        .all(|&m| (1..=radius).contains(&hamming_distance_index(m, 0))));
    out
}

/// Labels `0..L` with `y ~ z` iff `1 <= |y - z| <= k`.
pub fn label_band_graph(labels: usize, k: usize) -> Result<NeighborhoodGraph> {
    if k == 0 || k >= labels {
        return Err(Error::InvalidInput(format!(
            "band width must be in 1..{labels}, got {k}"
        )));
    }
    let space = SampleSpace::labels(labels)?;
    let adj = (0..labels)
        .map(|y| {
            let lo = y.saturating_sub(k);
            let hi = (y + k).min(labels - 1);
            (lo..=hi).filter(|&z| z != y).collect()
        })
        .collect();
    NeighborhoodGraph::new(space, UndirectedGraph { adj })
}

/// Extension `Ḡ`: adds every pair of distinct points sharing a neighbor.
pub fn extended_graph(g: &NeighborhoodGraph) -> NeighborhoodGraph {
    let n = g.space().size();
    let mut stamp = vec![usize::MAX; n];
    let adj = (0..n)
        .map(|z| {
            let mut list = Vec::new();
            stamp[z] = z;
            for &y in g.neighbors(z) {
                if stamp[y] != z {
                    stamp[y] = z;
                    list.push(y);
                }
                for &w in g.neighbors(y) {
                    if stamp[w] != z {
                        stamp[w] = z;
                        list.push(w);
                    }
                }
            }
            list.sort_unstable();
            list
        })
        .collect();
    NeighborhoodGraph {
        space: g.space().clone(),
        graph: UndirectedGraph { adj },
    }
}

/// Graph on a point subset `Y₀`; `vertices[i]` is the point of local vertex `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedGraph {
    pub vertices: Vec<usize>,
    pub graph: UndirectedGraph,
}

impl DerivedGraph {
    pub fn is_connected(&self) -> bool {
        self.graph.is_connected()
    }

    /// Components expressed in sample-space points.
    pub fn components(&self) -> Vec<Vec<usize>> {
        self.graph
            .components()
            .into_iter()
            .map(|c| c.into_iter().map(|v| self.vertices[v]).collect())
            .collect()
    }

    pub fn has_point_edge(&self, y: usize, z: usize) -> bool {
        match (self.vertices.binary_search(&y), self.vertices.binary_search(&z)) {
            (Ok(a), Ok(b)) => self.graph.has_edge(a, b),
            _ => false,
        }
    }
}

/// Which neighborhood a derived graph or cover test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodMode {
    /// Closed neighborhood `n(y) = b(y) ∪ {y}`.
    Closed,
    /// Open neighborhood `b(y)`.
    Open,
}

/// Sorted, deduplicated copy of a point subset, validated against the space.
pub fn normalize_subset(space: &SampleSpace, subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut v = subset.to_vec();
    v.sort_unstable();
    v.dedup();
    for &y in &v {
        space.check_point(y)?;
    }
    Ok(v)
}

fn derived_graph(g: &NeighborhoodGraph, subset: &[usize], mode: NeighborhoodMode) -> Result<DerivedGraph> {
    let vertices = normalize_subset(g.space(), subset)?;
    let n = g.space().size();
    // local index of each point in Y₀
    let mut local = vec![usize::MAX; n];
    for (i, &y) in vertices.iter().enumerate() {
        local[y] = i;
    }
    let mut stamp = vec![usize::MAX; vertices.len()];
    let mut adj = vec![Vec::new(); vertices.len()];
    for (i, &y) in vertices.iter().enumerate() {
        stamp[i] = i;
        let closed = mode == NeighborhoodMode::Closed;
        // w ranges over the neighborhood of y; members sharing w are the
        // Y₀-points whose neighborhood contains w, found through symmetry.
        let own = core::iter::once(y).filter(|_| closed).chain(g.neighbors(y).iter().copied());
        for w in own {
            let sharing = core::iter::once(w).filter(|_| closed).chain(g.neighbors(w).iter().copied());
            for y2 in sharing {
                let j = local[y2];
                if j != usize::MAX && stamp[j] != i {
                    stamp[j] = i;
                    adj[i].push(j);
                }
            }
        }
        adj[i].sort_unstable();
    }
    Ok(DerivedGraph {
        vertices,
        graph: UndirectedGraph { adj },
    })
}

/// `G₀`: `y ~ y'` iff `y ≠ y'` and `n(y) ∩ n(y') ≠ ∅`.
pub fn derived_graph_n(g: &NeighborhoodGraph, subset: &[usize]) -> Result<DerivedGraph> {
    derived_graph(g, subset, NeighborhoodMode::Closed)
}

/// `G₀′`: `y ~ y'` iff `y ≠ y'` and `b(y) ∩ b(y') ≠ ∅`.
pub fn derived_graph_b(g: &NeighborhoodGraph, subset: &[usize]) -> Result<DerivedGraph> {
    derived_graph(g, subset, NeighborhoodMode::Open)
}

/// Whether the neighborhoods of the subset cover the whole space.
pub fn covers(g: &NeighborhoodGraph, subset: &[usize], mode: NeighborhoodMode) -> Result<bool> {
    let subset = normalize_subset(g.space(), subset)?;
    let mut hit = vec![false; g.space().size()];
    for &y in &subset {
        if mode == NeighborhoodMode::Closed {
            hit[y] = true;
        }
        for &z in g.neighbors(y) {
            hit[z] = true;
        }
    }
    Ok(hit.into_iter().all(|h| h))
}

/// Broad class of local potential, which decides the relevant theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialClass {
    StrictlyConvex,
    PseudoSpherical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDiagnostics {
    pub class: PotentialClass,
    pub covers_n: bool,
    pub covers_b: bool,
    pub g0_connected: bool,
    pub g0prime_connected: bool,
    pub component_count_g0: usize,
    pub component_count_g0prime: usize,
    pub graph_connected: bool,
}

impl GraphDiagnostics {
    /// Sufficient graph condition for the coincidence axiom under the class.
    pub fn coincidence_guaranteed(&self) -> bool {
        match self.class {
            PotentialClass::StrictlyConvex => self.covers_n && self.g0_connected,
            PotentialClass::PseudoSpherical => self.covers_b && self.g0prime_connected,
        }
    }
}

pub fn diagnose(g: &NeighborhoodGraph, subset: &[usize], class: PotentialClass) -> Result<GraphDiagnostics> {
    let g0 = derived_graph_n(g, subset)?;
    let g0p = derived_graph_b(g, subset)?;
    let c0 = g0.graph.components().len();
    let c0p = g0p.graph.components().len();
    Ok(GraphDiagnostics {
        class,
        covers_n: covers(g, subset, NeighborhoodMode::Closed)?,
        covers_b: covers(g, subset, NeighborhoodMode::Open)?,
        g0_connected: c0 == 1,
        g0prime_connected: c0p == 1,
        component_count_g0: c0,
        component_count_g0prime: c0p,
        graph_connected: g.is_connected(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn enumerated(n: usize) -> SampleSpace {
        SampleSpace::enumerated((0..n).map(|i| i.to_string()).collect()).unwrap()
    }

    fn assert_valid(g: &NeighborhoodGraph) {
        let n = g.space().size();
        for y in 0..n {
            assert!(!g.neighbors(y).contains(&y), "loop at {y}");
            for &z in g.neighbors(y) {
                assert!(z < n);
                assert!(g.is_adjacent(z, y), "asymmetric {y} {z}");
            }
            assert!(g.neighbors(y).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn hamming_graph_sizes() {
        let g = hamming_graph(2, 1).unwrap();
        assert_valid(&g);
        assert_eq!(g.edge_count(), 4);
        assert!((0..4).all(|y| g.neighbors(y).len() == 2));

        let g = hamming_graph(2, 2).unwrap();
        assert_eq!(g.edge_count(), 6);

        let g = hamming_graph(3, 1).unwrap();
        assert_valid(&g);
        assert_eq!(g.edge_count(), 12);
        assert!((0..8).all(|y| g.neighbors(y).len() == 3));
        assert!(g.is_connected());
    }

    #[test]
    fn hamming_graph_matches_pair_enumeration() {
        for dim in 1..=4 {
            for radius in 1..=dim {
                let g = hamming_graph(dim, radius).unwrap();
                assert_valid(&g);
                for y in 0..(1 << dim) {
                    for z in 0..(1 << dim) {
                        let d = hamming_distance_index(y, z);
                        assert_eq!(g.is_adjacent(y, z), d >= 1 && d <= radius);
                    }
                }
            }
        }
    }

    #[test]
    fn hamming_graph_rejects_bad_radius() {
        assert!(hamming_graph(2, 0).is_err());
        assert!(hamming_graph(2, 3).is_err());
    }

    #[test]
    fn label_band_examples() {
        let g = label_band_graph(3, 1).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        let g = label_band_graph(10, 2).unwrap();
        assert_valid(&g);
        assert_eq!(g.neighbors(0).len(), 2);
        assert_eq!(g.neighbors(5).len(), 4);
        let g = label_band_graph(2, 1).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(label_band_graph(3, 3).is_err());
        assert!(label_band_graph(3, 0).is_err());
    }

    #[test]
    fn extended_graph_examples() {
        let single = NeighborhoodGraph::from_edges(enumerated(2), &[(0, 1)]).unwrap();
        assert_eq!(extended_graph(&single), single);

        let path = NeighborhoodGraph::from_edges(enumerated(3), &[(0, 1), (1, 2)]).unwrap();
        let ext = extended_graph(&path);
        assert!(ext.is_adjacent(0, 2));
        assert_eq!(ext.edge_count(), 3);

        let sq = hamming_graph(2, 1).unwrap();
        let ext = extended_graph(&sq);
        assert_valid(&ext);
        assert_eq!(ext.edge_count(), 6);
    }

    #[test]
    fn extended_graph_idempotent_on_complete() {
        let k4 = hamming_graph(2, 2).unwrap();
        assert_eq!(extended_graph(&k4), k4);
    }

    #[test]
    fn derived_graph_n_examples() {
        let sq = hamming_graph(2, 1).unwrap();
        let all: Vec<usize> = (0..4).collect();
        assert!(derived_graph_n(&sq, &all).unwrap().is_connected());

        let two = NeighborhoodGraph::from_edges(enumerated(4), &[(0, 1), (2, 3)]).unwrap();
        let d = derived_graph_n(&two, &[0, 2]).unwrap();
        assert_eq!(d.graph.edge_count(), 0);
        assert!(!d.is_connected());

        let d = derived_graph_n(&two, &[3]).unwrap();
        assert!(d.is_connected());
        assert!(derived_graph_n(&two, &[]).is_err());
    }

    #[test]
    fn derived_graph_b_examples() {
        let sq = hamming_graph(2, 1).unwrap();
        let all: Vec<usize> = (0..4).collect();
        let d = derived_graph_b(&sq, &all).unwrap();
        let comps = d.components();
        assert_eq!(comps.len(), 2);
        // parity classes: indices 0 (-1,-1) and 3 (+1,+1) share parity
        assert_eq!(comps, vec![vec![0, 3], vec![1, 2]]);

        let k4 = hamming_graph(2, 2).unwrap();
        assert!(derived_graph_b(&k4, &all).unwrap().is_connected());

        let path = NeighborhoodGraph::from_edges(enumerated(3), &[(0, 1), (1, 2)]).unwrap();
        let d = derived_graph_b(&path, &[0, 2]).unwrap();
        assert!(d.has_point_edge(0, 2));
    }

    #[test]
    fn g0prime_is_distance_two_on_radius_one_cube() {
        for dim in 2..=5 {
            let g = hamming_graph(dim, 1).unwrap();
            let all: Vec<usize> = (0..1 << dim).collect();
            let d = derived_graph_b(&g, &all).unwrap();
            for y in 0..1 << dim {
                for z in 0..1 << dim {
                    assert_eq!(d.has_point_edge(y, z), hamming_distance_index(y, z) == 2);
                }
            }
            let comps = d.components();
            assert_eq!(comps.len(), 2);
            for c in comps {
                let parity = c[0].count_ones() % 2;
                assert!(c.iter().all(|y| y.count_ones() % 2 == parity));
            }
        }
    }

    #[test]
    fn connectivity_examples() {
        let single = UndirectedGraph::empty(1);
        assert!(single.is_connected());
        let two = UndirectedGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(two.components().len(), 2);
        assert!(hamming_graph(3, 1).unwrap().is_connected());
    }

    #[test]
    fn covers_examples() {
        let path = NeighborhoodGraph::from_edges(enumerated(3), &[(0, 1), (1, 2)]).unwrap();
        assert!(covers(&path, &[0, 1, 2], NeighborhoodMode::Closed).unwrap());

        let with_isolated = NeighborhoodGraph::from_edges(enumerated(3), &[(0, 1)]).unwrap();
        assert!(!covers(&with_isolated, &[0, 1, 2], NeighborhoodMode::Open).unwrap());

        let sq = hamming_graph(2, 1).unwrap();
        assert!(!covers(&sq, &[3], NeighborhoodMode::Closed).unwrap());
    }

    #[test]
    fn diagnose_examples() {
        let all: Vec<usize> = (0..4).collect();
        let sq = hamming_graph(2, 1).unwrap();
        assert!(diagnose(&sq, &all, PotentialClass::StrictlyConvex)
            .unwrap()
            .coincidence_guaranteed());
        let d = diagnose(&sq, &all, PotentialClass::PseudoSpherical).unwrap();
        assert!(!d.coincidence_guaranteed());
        assert_eq!(d.component_count_g0prime, 2);
        assert!(!d.g0prime_connected);

        let k4 = hamming_graph(2, 2).unwrap();
        assert!(diagnose(&k4, &all, PotentialClass::PseudoSpherical)
            .unwrap()
            .coincidence_guaranteed());
    }

    #[test]
    fn from_adjacency_rejects_asymmetry() {
        assert!(UndirectedGraph::from_adjacency(vec![vec![1], vec![]]).is_err());
        assert!(UndirectedGraph::from_adjacency(vec![vec![0]]).is_err());
        assert!(UndirectedGraph::from_adjacency(vec![vec![1], vec![0]]).is_ok());
    }
}
