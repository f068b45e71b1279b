//! Property tests over randomized graphs, densities and parameters.

use localscore_core::blocks::cl_connectivity_matches_cover;
use localscore_core::estimation::{minimize, FitConfig, LikelihoodObjective, ScoreObjective, WeightedPoints};
use localscore_core::graph::{derived_graph_b, derived_graph_n, extended_graph, hamming_graph};
use localscore_core::models::{exact_log_z, normalize};
use localscore_core::{
    BlockSystem, BoltzmannModel, Locality, NeighborhoodGraph, PotentialFamily, PotentialKind, Probability,
    SampleSpace, ScoreSpec, ScoringRule, UnnormalizedModel, UnnormalizedVector,
};
use proptest::prelude::*;

fn enumerated(n: usize) -> SampleSpace {
    SampleSpace::enumerated((0..n).map(|i| format!("s{i}")).collect()).unwrap()
}

/// A random connected graph: a random spanning tree plus extra edges.
fn connected_graph(n: usize, parents: &[usize], extra: &[(usize, usize)]) -> NeighborhoodGraph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (parents[v - 1] % v, v)).collect();
    edges.extend(extra.iter().map(|&(a, b)| (a % n, b % n)).filter(|(a, b)| a != b));
    NeighborhoodGraph::from_edges(enumerated(n), &edges).unwrap()
}

fn arb_connected() -> impl Strategy<Value = NeighborhoodGraph> {
    (3usize..=8)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(0usize..64, n - 1),
                prop::collection::vec((0usize..64, 0usize..64), 0..6),
            )
        })
        .prop_map(|(n, p, e)| connected_graph(n, &p, &e))
}

fn arb_graph() -> impl Strategy<Value = NeighborhoodGraph> {
    (2usize..=8)
        .prop_flat_map(|n| (Just(n), prop::collection::vec((0usize..64, 0usize..64), 0..12)))
        .prop_map(|(n, e)| {
            let edges: Vec<_> = e.iter().map(|&(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
            NeighborhoodGraph::from_edges(enumerated(n), &edges).unwrap()
        })
}

fn arb_log_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn kinds() -> Vec<PotentialKind> {
    vec![
        PotentialKind::PseudoLikelihood,
        PotentialKind::RatioMatching,
        PotentialKind::DensityPower { gamma: 1.0 },
        PotentialKind::PseudoSpherical { gamma: 1.0 },
        PotentialKind::PseudoSpherical { gamma: 3.0 },
        PotentialKind::CompositeLikelihood,
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn probability(raw: &[f64]) -> Probability {
    let w: Vec<f64> = raw.iter().map(|v| v.exp()).collect();
    let s: f64 = w.iter().sum();
    Probability::new(w.iter().map(|v| v / s).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric_sorted_and_loop_free(g in arb_graph()) {
        for graph in [g.clone(), extended_graph(&g)] {
            let n = graph.space().size();
            for y in 0..n {
                let nb = graph.neighbors(y);
                prop_assert!(!nb.contains(&y));
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
                for &z in nb {
                    prop_assert!(graph.is_adjacent(z, y));
                }
            }
        }
    }

    #[test]
    fn extension_is_monotone(g in arb_graph()) {
        let e = extended_graph(&g);
        for (a, b) in g.edges() {
            prop_assert!(e.is_adjacent(a, b));
        }
    }

    #[test]
    fn derived_graph_connectivity_matches_the_graph(g in arb_graph()) {
        let all: Vec<usize> = (0..g.space().size()).collect();
        let g0 = derived_graph_n(&g, &all).unwrap();
        if g0.is_connected() {
            prop_assert!(g.is_connected());
        }
        prop_assert_eq!(g0.is_connected(), g.is_connected());
    }

    #[test]
    fn block_connectivity_matches_cover(dim in 1usize..=4, raw in prop::collection::vec(1usize..16, 1..4)) {
        let blocks: Vec<Vec<usize>> = raw
            .iter()
            .map(|&mask| (0..dim).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect::<Vec<_>>())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect();
        prop_assume!(!blocks.is_empty());
        let b = BlockSystem::new(dim, &blocks).unwrap();
        prop_assert!(cl_connectivity_matches_cover(&b).unwrap());
    }

    #[test]
    fn homogeneity(g in arb_connected(), raw in arb_log_values(8), k in 0usize..6) {
        let n = g.space().size();
        let f = UnnormalizedVector::from_log(raw[..n].to_vec()).unwrap();
        let fam = PotentialFamily::new(kinds()[k].clone(), Locality::graph(g)).unwrap();
        for y in 0..n {
            let s = fam.score(y, &f).unwrap();
            for lambda in [1e-3, 0.5, 2.0, 1e3] {
                let t = fam.score(y, &f.scaled(lambda)).unwrap();
                prop_assert!((s - t).abs() <= 1e-9 * (1.0 + s.abs()), "λ={lambda}: {s} vs {t}");
            }
        }
    }

    #[test]
    fn score_is_the_negative_log_derivative_of_the_potential(
        g in arb_connected(),
        raw in prop::collection::vec(-3.0f64..3.0, 8),
        k in 0usize..6,
    ) {
        let n = g.space().size();
        let logs = raw[..n].to_vec();
        let fam = PotentialFamily::new(kinds()[k].clone(), Locality::graph(g)).unwrap();
        let f = UnnormalizedVector::from_log(logs.clone()).unwrap();
        let h = 1e-5;
        for y in 0..n {
            let mut up = logs.clone();
            let mut dn = logs.clone();
            up[y] += h;
            dn[y] -= h;
            let pu = fam.composite_potential(&UnnormalizedVector::from_log(up).unwrap()).unwrap();
            let pd = fam.composite_potential(&UnnormalizedVector::from_log(dn).unwrap()).unwrap();
            // d/d(log f_y) = f_y ∂/∂f_y
            let fd = -(pu - pd) / (2.0 * h) / f.value(y);
            let s = fam.score(y, &f).unwrap();
            prop_assert!(rel(s, fd) <= 1e-5, "y={y}: {s} vs {fd}");
        }
    }

    #[test]
    fn properness_and_divergence_identity(
        g in arb_connected(),
        rp in prop::collection::vec(-3.0f64..3.0, 8),
        rq in prop::collection::vec(-3.0f64..3.0, 8),
        k in 0usize..6,
    ) {
        let n = g.space().size();
        let p = probability(&rp[..n]);
        let q = probability(&rq[..n]);
        let fam = PotentialFamily::new(kinds()[k].clone(), Locality::graph(g)).unwrap();
        let fq = q.to_unnormalized();
        let fp = p.to_unnormalized();
        let spp = fam.expected_score(&p, &fp).unwrap();
        let spq = fam.expected_score(&p, &fq).unwrap();
        prop_assert!(spq - spp >= -1e-9, "S(p,q)={spq} < S(p,p)={spp}");
        let d = fam.divergence(&fp, &fq).unwrap();
        prop_assert!(d >= 0.0);
        let rhs: f64 = (0..n).map(|y| fp.value(y) * fam.score(y, &fq).unwrap()).sum::<f64>()
            + fam.composite_potential(&fp).unwrap();
        prop_assert!((d - rhs).abs() <= 1e-9 * (1.0 + rhs.abs().max(d.abs())), "{d} vs {rhs}");
    }

    #[test]
    fn index_swap_identity(g in arb_graph(), entries in prop::collection::vec(-1000i64..1000, 64)) {
        let n = g.space().size();
        let a = |x: usize, y: usize| entries[(x * 8 + y) % 64];
        let lhs: i64 = (0..n).map(|x| g.neighbors(x).iter().map(|&y| a(x, y)).sum::<i64>()).sum();
        let rhs: i64 = (0..n).map(|x| g.neighbors(x).iter().map(|&y| a(y, x)).sum::<i64>()).sum();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn psi_identities(r in 0.01f64..100.0) {
        let pl = PotentialKind::PseudoLikelihood.psi(r).unwrap();
        prop_assert!(rel(pl, (1.0 + r).ln()) <= 1e-12);
        let rm = PotentialKind::RatioMatching.psi(r).unwrap();
        prop_assert!(rel(rm, 1.0 / (1.0 + 1.0 / r).powi(2)) <= 1e-12);
        for gamma in [0.5, 1.0, 3.0] {
            let dp = PotentialKind::DensityPower { gamma }.psi(r).unwrap();
            let want = gamma / (1.0 + gamma) * r.powf(1.0 + gamma) - r.powf(-gamma);
            prop_assert!(rel(dp, want) <= 1e-12, "γ={gamma}: {dp} vs {want}");
        }
    }

    #[test]
    fn diagonal_shift_leaves_scores_unchanged(
        upper in prop::collection::vec(-1.0f64..1.0, 6),
        c in -5.0f64..5.0,
        spec in prop::sample::select(vec!["pl", "rm", "dp:1", "ps:1", "mcl", "cl:1;2,3;4"]),
    ) {
        let m = BoltzmannModel::from_upper(4, upper).unwrap();
        let shifted = m.with_diagonal_shift(c);
        let rule = ScoreSpec::parse(spec).unwrap().build(Locality::hamming(4, 1).unwrap()).unwrap();
        let a = UnnormalizedVector::from_log(m.log_table().unwrap()).unwrap();
        let b = UnnormalizedVector::from_log(shifted.log_table().unwrap()).unwrap();
        for y in 0..16 {
            let s = rule.score(y, &a).unwrap();
            let t = rule.score(y, &b).unwrap();
            prop_assert!((s - t).abs() <= 1e-9 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn normalization_matches_log_z(upper in prop::collection::vec(-1.5f64..1.5, 10)) {
        let m = BoltzmannModel::from_upper(5, upper).unwrap();
        let p = normalize(&m).unwrap();
        let lz = exact_log_z(&m).unwrap();
        for y in 0..32 {
            prop_assert!((p.weights()[y].ln() - (m.log_f(y) - lz)).abs() <= 1e-12);
        }
    }

    #[test]
    fn log_f_gradient_matches_differences(upper in prop::collection::vec(-1.5f64..1.5, 6), y in 0usize..16) {
        let m = BoltzmannModel::from_upper(4, upper.clone()).unwrap();
        let g = m.grad_log_f(y).unwrap();
        for k in 0..6 {
            let mut up = upper.clone();
            let mut dn = upper.clone();
            up[k] += 1e-6;
            dn[k] -= 1e-6;
            let fd = (BoltzmannModel::from_upper(4, up).unwrap().log_f(y)
                - BoltzmannModel::from_upper(4, dn).unwrap().log_f(y))
                / 2e-6;
            prop_assert!((g[k] - fd).abs() <= 1e-6);
        }
    }

    #[test]
    fn line_search_descends(
        points in prop::collection::vec(0usize..8, 5..40),
        spec in prop::sample::select(vec!["pl", "rm", "ps:1", "mcl", "mle"]),
    ) {
        let init = BoltzmannModel::zeros(3).unwrap();
        let cfg = FitConfig { max_iterations: 50, ..FitConfig::default() };
        let stats = if spec == "mle" {
            minimize(&LikelihoodObjective::new(init.clone(), WeightedPoints::from_samples(&points).unwrap()).unwrap(), init.params().to_vec(), &cfg).unwrap().1
        } else {
            let rule = ScoreSpec::parse(spec).unwrap().build(Locality::hamming(3, 1).unwrap()).unwrap();
            minimize(&ScoreObjective::new(&rule, init.clone(), WeightedPoints::from_samples(&points).unwrap()).unwrap(), init.params().to_vec(), &cfg).unwrap().1
        };
        for w in stats.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective);
        }
    }
}

#[test]
fn hypercube_radius_one_splits_by_parity() {
    for dim in 1..=5 {
        let g = hamming_graph(dim, 1).unwrap();
        let all: Vec<usize> = (0..1 << dim).collect();
        let comps = derived_graph_b(&g, &all).unwrap().components();
        if dim == 1 {
            // b(0) = {1}, b(1) = {0}: disjoint
            assert_eq!(comps.len(), 2);
            continue;
        }
        assert_eq!(comps.len(), 2, "dim {dim}");
        for c in comps {
            let parity = |y: usize| y.count_ones() % 2;
            assert!(c.iter().all(|&y| parity(y) == parity(c[0])));
        }
    }
}

#[test]
fn extension_is_idempotent_on_complete_graphs() {
    let n = 5;
    let edges: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let g = NeighborhoodGraph::from_edges(enumerated(n), &edges).unwrap();
    let e = extended_graph(&g);
    assert_eq!(e.edge_count(), g.edge_count());
}

#[test]
fn cl_rules_are_homogeneous_on_blocks() {
    let rule = ScoringRule::CompositeLikelihood(Locality::blocks(BlockSystem::parse(3, "1,2;3").unwrap()));
    let f = UnnormalizedVector::from_log((0..8).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    for y in 0..8 {
        let s = rule.score(y, &f).unwrap();
        assert!((s - rule.score(y, &f.scaled(7.0)).unwrap()).abs() < 1e-12);
    }
}
