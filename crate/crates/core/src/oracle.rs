//! Brute-force checks on small spaces: properness, coincidence,
//! agreement of the score evaluation paths, homogeneity, the divergence
//! identity, and the block-connectivity theorem.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::blocks::{cl_connectivity_matches_cover, BlockSystem};
use crate::density::{Probability, UnnormalizedVector};
use crate::error::{Error, Result};
use crate::graph::PotentialClass;
use crate::math;
use crate::potential::{ActiveSet, PotentialFamily, PotentialKind};
use crate::sampling::RngStream;
use crate::score::{closed_form_score, ScoringRule};

pub const MAX_WITNESSES: usize = 10;
pub const PROPERNESS_TOLERANCE: f64 = 1e-9;
pub const COINCIDENCE_THRESHOLD: f64 = 1e-8;
pub const COINCIDENCE_MIN_GAP: f64 = 0.01;
pub const PATH_TOLERANCE: f64 = 1e-5;
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-9;
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
/// Step in `log f` for the finite-difference score path.
pub const FD_STEP: f64 = 1e-5;
pub const HOMOGENEITY_SCALES: [f64; 4] = [1e-3, 0.5, 2.0, 1e3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub check_name: String,
    pub trials: usize,
    /// Larger is worse. For coincidence this is the negated minimum
    /// divergence, so the pass rule reads the same everywhere.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub witnesses: Vec<String>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
}

impl OracleReport {
    fn new(check_name: &str, tolerance: f64) -> Self {
        Self {
            check_name: check_name.into(),
            trials: 0,
            worst_violation: f64::NEG_INFINITY,
            tolerance,
            witnesses: Vec::new(),
            notes: Vec::new(),
            verdict: Verdict::Pass,
        }
    }

    /// Records one trial's violation and keeps a witness when it exceeds
    /// the tolerance.
    fn record(&mut self, violation: f64, witness: impl FnOnce() -> String) {
        self.trials += 1;
        let violation = if violation.is_nan() { f64::INFINITY } else { violation };
        if violation > self.worst_violation {
            self.worst_violation = violation;
        }
        if violation > self.tolerance && self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(witness());
        }
    }

    fn finish(mut self) -> Self {
        if self.trials == 0 {
            self.worst_violation = 0.0;
        }
        self.verdict = if self.worst_violation <= self.tolerance && self.witnesses.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} verdict={} trials={} worst_violation={:e} tolerance={:e}",
            self.check_name, self.verdict, self.trials, self.worst_violation, self.tolerance
        )?;
        for n in &self.notes {
            write!(f, "\n  note: {n}")?;
        }
        for w in &self.witnesses {
            write!(f, "\n  witness: {w}")?;
        }
        Ok(())
    }
}

/// Positive vector with entries `exp(U[−3, 3])`.
pub fn random_positive(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| math::exp(6.0 * rng.uniform() - 3.0)).collect()
}

pub fn random_probability(n: usize, rng: &mut RngStream) -> Probability {
    Probability::from_weights(&random_positive(n, rng)).expect("positive weights")
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(","))
}

fn small_space(rule_size: usize, limit: usize) -> Result<()> {
    if rule_size > limit {
        return Err(Error::SpaceTooLarge {
            size: rule_size,
            limit,
        });
    }
    Ok(())
}

/// Worst `S(p, p) − S(p, q)` over random positive `(p, q)`.
pub fn check_properness(rule: &ScoringRule, trials: usize, seed: u64) -> Result<OracleReport> {
    check_properness_with(rule, &[], trials, seed)
}

/// As [`check_properness`], with fixed `(p, q)` pairs tried before the random ones.
pub fn check_properness_with(
    rule: &ScoringRule,
    fixed: &[(Probability, Probability)],
    trials: usize,
    seed: u64,
) -> Result<OracleReport> {
    let n = rule.locality().size();
    small_space(n, 16)?;
    let mut report = OracleReport::new(&format!("properness[{}]", rule.name()), PROPERNESS_TOLERANCE);
    for (p, q) in fixed {
        let spp = rule.expected_score(p, p)?;
        let spq = rule.expected_score(p, q)?;
        report.record(spp - spq, || {
            format!("p={} q={} S(p,p)-S(p,q)={:e}", fmt_vec(p.weights()), fmt_vec(q.weights()), spp - spq)
        });
    }
    let mut rng = RngStream::new(seed, 0);
    for t in 0..trials {
        let p = random_probability(n, &mut rng);
        let q = if t == 0 { p.clone() } else { random_probability(n, &mut rng) };
        let spp = rule.expected_score(&p, &p)?;
        let spq = rule.expected_score(&p, &q)?;
        report.record(spp - spq, || {
            format!("p={} q={} S(p,p)-S(p,q)={:e}", fmt_vec(p.weights()), fmt_vec(q.weights()), spp - spq)
        });
    }
    Ok(report.finish())
}

/// A pair `p ≠ q` with `D_Φ(p, q) = 0` expected for some families.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub name: String,
    pub p: Probability,
    pub q: Probability,
}

/// The pseudo-spherical pair on `{±1}²`: weights over the points
/// `(+1,+1), (−1,−1), (−1,+1), (+1,−1)` are `(0.1, 0.1, 0.4, 0.4)` and
/// `(0.2, 0.2, 0.3, 0.3)`.
pub fn hypercube_parity_pair() -> Counterexample {
    // indices: (−1,−1)=0, (+1,−1)=1, (−1,+1)=2, (+1,+1)=3
    Counterexample {
        name: "hypercube-parity-pair".into(),
        p: Probability::from_weights(&[0.1, 0.4, 0.4, 0.1]).expect("valid"),
        q: Probability::from_weights(&[0.2, 0.3, 0.3, 0.2]).expect("valid"),
    }
}

/// Classes of points whose ratio `q_y / p_y` every local divergence term
/// ties together: members of one `b(y)` for pseudo-spherical families
/// (scale invariance of the norm), of one `n(y)` otherwise, over `y ∈ Y₀`.
pub fn ratio_classes(fam: &PotentialFamily) -> Vec<usize> {
    let n = fam.size();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let closed = fam.kind().class() != PotentialClass::PseudoSpherical;
    for y in fam.active_set().points(n) {
        let mut members = fam.locality().neighbors(y);
        if closed {
            members.push(y);
        }
        if let Some((&first, rest)) = members.split_first() {
            for &z in rest {
                let (a, b) = (find(&mut parent, first), find(&mut parent, z));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|y| find(&mut parent, y)).collect();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for y in 0..n {
        let r = roots[y];
        if labels[r] == usize::MAX {
            labels[r] = next;
            next += 1;
        }
        out[y] = labels[r];
    }
    out
}

/// Rescales the uniform distribution by a different factor on each ratio
/// class. Returns `None` when there is a single class.
pub fn class_rescaling_pair(fam: &PotentialFamily) -> Option<Counterexample> {
    let classes = ratio_classes(fam);
    let count = classes.iter().copied().max().map_or(0, |m| m + 1);
    if count < 2 {
        return None;
    }
    let n = classes.len();
    let p = Probability::uniform(n);
    let raw: Vec<f64> = classes.iter().map(|&c| 1.0 + c as f64).collect();
    let q = Probability::from_weights(&raw).ok()?;
    if p.max_abs_diff(&q) < COINCIDENCE_MIN_GAP {
        return None;
    }
    Some(Counterexample {
        name: format!("class-rescaling({count} classes)"),
        p,
        q,
    })
}

/// Registered counterexamples applicable to a family.
pub fn counterexamples_for(fam: &PotentialFamily) -> Vec<Counterexample> {
    let mut out = Vec::new();
    if fam.locality().space().hypercube_dim() == Some(2) {
        out.push(hypercube_parity_pair());
    }
    if let Some(c) = class_rescaling_pair(fam) {
        out.push(c);
    }
    out
}

/// Minimum `D_Φ(p, q)` over random pairs with `‖p − q‖∞ ≥ 0.01`, plus the
/// registered counterexamples. Fails when any divergence reaches `1e−8`.
pub fn check_coincidence(fam: &PotentialFamily, trials: usize, seed: u64) -> Result<OracleReport> {
    let n = fam.size();
    small_space(n, 16)?;
    let mut report = OracleReport::new(&format!("coincidence[{}]", fam.kind().name()), -COINCIDENCE_THRESHOLD);
    let mut rng = RngStream::new(seed, 0);
    let mut done = 0;
    while done < trials {
        let p = random_probability(n, &mut rng);
        let q = random_probability(n, &mut rng);
        if p.max_abs_diff(&q) < COINCIDENCE_MIN_GAP {
            continue;
        }
        done += 1;
        let d = fam.divergence(&p.to_unnormalized(), &q.to_unnormalized())?;
        report.record(-d, || format!("p={} q={} D={d:e}", fmt_vec(p.weights()), fmt_vec(q.weights())));
    }
    for c in counterexamples_for(fam) {
        let d = fam.divergence(&c.p.to_unnormalized(), &c.q.to_unnormalized())?;
        report.notes.push(format!("counterexample {} D={d:e}", c.name));
        report.record(-d, || {
            format!(
                "{}: p={} q={} D={d:e}",
                c.name,
                fmt_vec(c.p.weights()),
                fmt_vec(c.q.weights())
            )
        });
    }
    if let Ok(diag) = fam.diagnose() {
        report.notes.push(format!(
            "graph diagnostics: coincidence guaranteed={}",
            diag.coincidence_guaranteed()
        ));
    }
    Ok(report.finish())
}

/// `S(y, f)` by central differences of `φ` in `log f_y`.
pub fn finite_difference_score(fam: &PotentialFamily, f: &UnnormalizedVector, y: usize) -> Result<f64> {
    let mut up = f.log_values().to_vec();
    let mut dn = up.clone();
    up[y] += FD_STEP;
    dn[y] -= FD_STEP;
    let a = fam.composite_potential(&UnnormalizedVector::from_log(up)?)?;
    let b = fam.composite_potential(&UnnormalizedVector::from_log(dn)?)?;
    Ok(-(a - b) / (2.0 * FD_STEP * f.value(y)))
}

/// Largest pairwise relative discrepancy among the generic expansion, the
/// closed form (or ψ form), the log-domain evaluator and the negated
/// finite difference of `φ`.
pub fn check_score_paths(fam: &PotentialFamily, trials: usize, seed: u64) -> Result<OracleReport> {
    let n = fam.size();
    small_space(n, 256)?;
    let mut report = OracleReport::new(&format!("score-paths[{}]", fam.kind().name()), PATH_TOLERANCE);
    let mut rng = RngStream::new(seed, 0);
    let closed_ok = fam.active_set() == &ActiveSet::All && !matches!(fam.kind(), PotentialKind::CustomAdditive(_));
    for _ in 0..trials {
        let f = UnnormalizedVector::from_values(&random_positive(n, &mut rng))?;
        for y in 0..n {
            let mut values = vec![fam.generic_score(y, &f)?, fam.score(y, &f)?, finite_difference_score(fam, &f, y)?];
            if closed_ok {
                values.push(closed_form_score(fam, y, &f)?);
            }
            if fam.kind().is_additive() {
                values.push(fam.psi_score(y, &f)?);
            }
            let mut worst: f64 = 0.0;
            for i in 0..values.len() {
                for j in i + 1..values.len() {
                    worst = worst.max(math::rel_diff(values[i], values[j]));
                }
            }
            report.record(worst, || format!("y={y} f={} paths={}", fmt_vec(f.log_values()), fmt_vec(&values)));
        }
    }
    Ok(report.finish())
}

/// `|S(y, λf) − S(y, f)|` relative, for `λ ∈ {1e−3, 0.5, 2, 1e3}`.
pub fn check_homogeneity(rule: &ScoringRule, trials: usize, seed: u64) -> Result<OracleReport> {
    let n = rule.locality().size();
    small_space(n, 256)?;
    let mut report = OracleReport::new(&format!("homogeneity[{}]", rule.name()), HOMOGENEITY_TOLERANCE);
    let mut rng = RngStream::new(seed, 0);
    for _ in 0..trials {
        let f = UnnormalizedVector::from_values(&random_positive(n, &mut rng))?;
        for &lambda in &HOMOGENEITY_SCALES {
            let g = f.scaled(lambda);
            for y in 0..n {
                let a = rule.score(y, &f)?;
                let b = rule.score(y, &g)?;
                report.record(math::rel_diff(a, b), || format!("y={y} lambda={lambda} S={a} S_scaled={b}"));
            }
        }
    }
    Ok(report.finish())
}

/// Standard composite likelihood against the gradient-exact variant on the
/// same block system, absolute difference.
pub fn check_cl_reduction(blocks: &BlockSystem, trials: usize, seed: u64, tolerance: f64) -> Result<OracleReport> {
    let loc = crate::locality::Locality::blocks(blocks.clone());
    let n = loc.size();
    small_space(n, 256)?;
    let cl = ScoringRule::CompositeLikelihood(loc.clone());
    let mcl = PotentialFamily::new(PotentialKind::CompositeLikelihood, loc)?;
    let mut report = OracleReport::new(&format!("cl-reduction[{blocks}]"), tolerance);
    let mut rng = RngStream::new(seed, 0);
    for _ in 0..trials {
        let q = random_probability(n, &mut rng).to_unnormalized();
        for y in 0..n {
            let a = cl.score(y, &q)?;
            let b = mcl.score(y, &q)?;
            report.record(math::abs(a - b), || format!("y={y} cl={a} mcl={b}"));
        }
    }
    Ok(report.finish())
}

/// Random block system on `{1..dim}`: `1..=dim+1` random nonempty blocks.
pub fn random_block_system(dim: usize, rng: &mut RngStream) -> BlockSystem {
    let m = 1 + rng.below(dim + 1);
    let blocks: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let mask = 1 + rng.below((1 << dim) - 1);
            (0..dim).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect()
        })
        .collect();
    BlockSystem::new(dim, &blocks).expect("nonempty blocks in range")
}

/// Connectivity of `G₀` matches `∪ A_ℓ = {1..D}` on random block systems
/// with `D ≤ d_max`.
pub fn check_theorem5(d_max: usize, trials: usize, seed: u64) -> Result<OracleReport> {
    if d_max == 0 || d_max > 4 {
        return Err(Error::InvalidInput(format!("d_max must lie in 1..=4, got {d_max}")));
    }
    let mut report = OracleReport::new("block-connectivity", 0.0);
    let mut rng = RngStream::new(seed, 0);
    for _ in 0..trials {
        let dim = 1 + rng.below(d_max);
        let b = random_block_system(dim, &mut rng);
        let ok = cl_connectivity_matches_cover(&b)?;
        report.record(if ok { 0.0 } else { 1.0 }, || format!("dim={dim} blocks={b}"));
    }
    Ok(report.finish())
}

/// `D_Φ(f, g) = Σ_{y} f_y S(y, g) + φ(f)` on random positive `(f, g)`,
/// plus the neighbor index swap on integer arrays.
pub fn check_divergence_identity(fam: &PotentialFamily, trials: usize, seed: u64) -> Result<OracleReport> {
    let n = fam.size();
    small_space(n, 16)?;
    let mut report = OracleReport::new(&format!("divergence-identity[{}]", fam.kind().name()), IDENTITY_TOLERANCE);
    let mut rng = RngStream::new(seed, 0);
    for t in 0..trials {
        let f = UnnormalizedVector::from_values(&random_positive(n, &mut rng))?;
        let g = if t == 0 {
            f.clone()
        } else {
            UnnormalizedVector::from_values(&random_positive(n, &mut rng))?
        };
        let lhs = fam.divergence(&f, &g)?;
        let mut rhs = fam.composite_potential(&f)?;
        for y in 0..n {
            rhs += f.value(y) * fam.score(y, &g)?;
        }
        report.record(math::rel_diff(lhs, rhs), || format!("f={} g={} D={lhs} rhs={rhs}", fmt_vec(f.log_values()), fmt_vec(g.log_values())));

        let swapped = swap_lemma_gap(fam, &mut rng);
        report.record(swapped as f64, || format!("index swap differs by {swapped}"));
    }
    Ok(report.finish())
}

/// `Σ_y Σ_{z∈b(y)} A(y,z) − Σ_z Σ_{y∈b(z)} A(y,z)` for a random integer array.
fn swap_lemma_gap(fam: &PotentialFamily, rng: &mut RngStream) -> i64 {
    let n = fam.size();
    let a: Vec<i64> = (0..n * n).map(|_| rng.below(2001) as i64 - 1000).collect();
    let loc = fam.locality();
    let mut left = 0i64;
    let mut right = 0i64;
    for y in 0..n {
        for z in loc.neighbors(y) {
            left += a[y * n + z];
        }
    }
    for z in 0..n {
        for y in loc.neighbors(z) {
            right += a[y * n + z];
        }
    }
    left - right
}
