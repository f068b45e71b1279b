//! Local potential families `Φ = {φ_y : y ∈ Y₀}`, the composite
//! 1-homogeneous potential `φ(f) = Σ_{y∈Y₀} f_y φ_y(f_{b(y)}/f_y)`, the
//! composite local Bregman divergence and the gradient score
//! `S(y, f) = -∂φ/∂f_y` evaluated from its local expansion.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::density::{LogDensity, UnnormalizedVector};
use crate::error::{Error, Result};
use crate::graph::{diagnose, GraphDiagnostics, PotentialClass};
use crate::locality::Locality;
use crate::math;

pub type ScalarFn = fn(f64) -> f64;

/// One-dimensional convex function used additively,
/// `φ_y(g) = Σ_{z∈b(y)} φ(g_z)`.
#[derive(Clone, Copy)]
pub struct CustomPotential {
    pub name: &'static str,
    pub phi: ScalarFn,
    pub dphi: ScalarFn,
    /// Second derivative; needed only for gradient-based fitting.
    pub d2phi: Option<ScalarFn>,
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential").field("name", &self.name).finish()
    }
}

impl CustomPotential {
    /// Spot-check of convexity: second differences at sampled points must
    /// not fall below `-1e-8`.
    pub fn spot_check_convexity(&self) -> Result<()> {
        let h = 1e-3;
        for k in -30..=30 {
            let r = math::exp(k as f64 * 0.1);
            let second = (self.phi)(r + h) - 2.0 * (self.phi)(r) + (self.phi)(r - h);
            if second < -1e-8 || !second.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "custom potential '{}' is not convex near r = {r}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    PseudoLikelihood,
    RatioMatching,
    DensityPower { gamma: f64 },
    PseudoSpherical { gamma: f64 },
    /// Block-conditional potential `-Σ_ℓ log(1 + Σ_{z∈b_ℓ(y)} g_z)`; the blocks
    /// come from the family's locality.
    CompositeLikelihood,
    CustomAdditive(CustomPotential),
}

impl PotentialKind {
    pub fn is_additive(&self) -> bool {
        matches!(
            self,
            PotentialKind::PseudoLikelihood
                | PotentialKind::RatioMatching
                | PotentialKind::DensityPower { .. }
                | PotentialKind::CustomAdditive(_)
        )
    }

    pub fn class(&self) -> PotentialClass {
        match self {
            PotentialKind::PseudoSpherical { .. } => PotentialClass::PseudoSpherical,
            _ => PotentialClass::StrictlyConvex,
        }
    }

    pub fn name(&self) -> String {
        match self {
            PotentialKind::PseudoLikelihood => "pl".into(),
            PotentialKind::RatioMatching => "rm".into(),
            PotentialKind::DensityPower { gamma } => format!("dp:{gamma}"),
            PotentialKind::PseudoSpherical { gamma } => format!("ps:{gamma}"),
            PotentialKind::CompositeLikelihood => "mcl".into(),
            PotentialKind::CustomAdditive(c) => format!("custom:{}", c.name),
        }
    }

    /// `φ(r)` of an additive kind.
    pub fn scalar_phi(&self, r: f64) -> Option<f64> {
        Some(match self {
            PotentialKind::PseudoLikelihood => -math::ln_1p(r),
            PotentialKind::RatioMatching => -0.5 * r / (1.0 + r),
            PotentialKind::DensityPower { gamma } => math::powf(r, 1.0 + gamma) / (1.0 + gamma),
            PotentialKind::CustomAdditive(c) => (c.phi)(r),
            _ => return None,
        })
    }

    /// `φ′(r)` of an additive kind.
    pub fn scalar_dphi(&self, r: f64) -> Option<f64> {
        Some(match self {
            PotentialKind::PseudoLikelihood => -1.0 / (1.0 + r),
            PotentialKind::RatioMatching => -0.5 / ((1.0 + r) * (1.0 + r)),
            PotentialKind::DensityPower { gamma } => math::powf(r, *gamma),
            PotentialKind::CustomAdditive(c) => (c.dphi)(r),
            _ => return None,
        })
    }

    /// `φ″(r)` of an additive kind, when known.
    pub fn scalar_d2phi(&self, r: f64) -> Option<f64> {
        match self {
            PotentialKind::PseudoLikelihood => Some(1.0 / ((1.0 + r) * (1.0 + r))),
            PotentialKind::RatioMatching => Some(1.0 / ((1.0 + r) * (1.0 + r) * (1.0 + r))),
            PotentialKind::DensityPower { gamma } => Some(gamma * math::powf(r, gamma - 1.0)),
            PotentialKind::CustomAdditive(c) => c.d2phi.map(|f| f(r)),
            _ => None,
        }
    }

    /// `ψ(r) = r φ′(r) − φ(r) − φ′(1/r)`, the per-neighbor score of an
    /// additive potential when `Y₀ = Y`.
    pub fn psi(&self, r: f64) -> Option<f64> {
        Some(r * self.scalar_dphi(r)? - self.scalar_phi(r)? - self.scalar_dphi(1.0 / r)?)
    }

    fn validate(&self) -> Result<()> {
        match self {
            PotentialKind::DensityPower { gamma } | PotentialKind::PseudoSpherical { gamma } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
                }
            }
            PotentialKind::CustomAdditive(c) => c.spot_check_convexity()?,
            _ => {}
        }
        Ok(())
    }
}

/// The active subset `Y₀`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActiveSet {
    All,
    /// Sorted, deduplicated points.
    Subset(Vec<usize>),
}

impl ActiveSet {
    pub fn contains(&self, y: usize) -> bool {
        match self {
            ActiveSet::All => true,
            ActiveSet::Subset(v) => v.binary_search(&y).is_ok(),
        }
    }

    pub fn points(&self, size: usize) -> Vec<usize> {
        match self {
            ActiveSet::All => (0..size).collect(),
            ActiveSet::Subset(v) => v.clone(),
        }
    }
}

/// A collection of local potentials bound to a neighborhood system.
#[derive(Debug, Clone)]
pub struct PotentialFamily {
    kind: PotentialKind,
    locality: Locality,
    active: ActiveSet,
}

impl PotentialFamily {
    pub fn new(kind: PotentialKind, locality: Locality) -> Result<Self> {
        Self::with_active_set(kind, locality, ActiveSet::All)
    }

    pub fn with_active_set(kind: PotentialKind, locality: Locality, active: ActiveSet) -> Result<Self> {
        kind.validate()?;
        let size = locality.size();
        let active = match active {
            ActiveSet::All => ActiveSet::All,
            ActiveSet::Subset(mut v) => {
                if v.is_empty() {
                    return Err(Error::EmptySubset);
                }
                v.sort_unstable();
                v.dedup();
                if let Some(&y) = v.iter().find(|&&y| y >= size) {
                    return Err(Error::PointOutOfRange { point: y, size });
                }
                ActiveSet::Subset(v)
            }
        };
        // Implicit hypercube localities never produce empty neighborhoods.
        if let Locality::Graph(g) = &locality {
            for y in active.points(size) {
                if g.neighbors(y).is_empty() {
                    return Err(Error::EmptyNeighborhood(y));
                }
            }
        }
        Ok(Self { kind, locality, active })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn locality(&self) -> &Locality {
        &self.locality
    }

    pub fn active_set(&self) -> &ActiveSet {
        &self.active
    }

    pub fn size(&self) -> usize {
        self.locality.size()
    }

    pub fn is_active(&self, y: usize) -> bool {
        self.active.contains(y)
    }

    /// Graph diagnostics for the coincidence axiom under this family's class.
    pub fn diagnose(&self) -> Result<GraphDiagnostics> {
        let g = self.locality.materialize()?;
        diagnose(&g, &self.active.points(self.size()), self.kind.class())
    }

    fn check_local_args(&self, y: usize, g: &[f64]) -> Result<Vec<usize>> {
        self.locality.space().check_point(y)?;
        if !self.is_active(y) {
            return Err(Error::NotActive(y));
        }
        let nb = self.locality.neighbors(y);
        if g.len() != nb.len() {
            return Err(Error::DimensionMismatch {
                expected: nb.len(),
                found: g.len(),
            });
        }
        if let Some(i) = g.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("local argument entry {i} must be positive")));
        }
        Ok(nb)
    }

    /// `φ_y(g)` for `g ∈ R_{++}^{b(y)}` ordered like the sorted `b(y)`.
    pub fn local_potential(&self, y: usize, g: &[f64]) -> Result<f64> {
        let nb = self.check_local_args(y, g)?;
        Ok(self.phi_local(y, &nb, g))
    }

    /// `∇φ_y(g)`.
    pub fn local_potential_gradient(&self, y: usize, g: &[f64]) -> Result<Vec<f64>> {
        let nb = self.check_local_args(y, g)?;
        let mut out = vec![0.0; g.len()];
        self.grad_local(y, &nb, g, &mut out);
        Ok(out)
    }

    /// Block positions within the sorted `b(y)`.
    fn block_positions(&self, y: usize, nb: &[usize]) -> Vec<Vec<usize>> {
        let mut blocks = Vec::new();
        self.locality.blocks_into(y, &mut blocks);
        blocks
            .into_iter()
            .map(|b| {
                b.into_iter()
                    .map(|z| nb.binary_search(&z).expect("block neighbors lie in b(y)"))
                    .collect()
            })
            .collect()
    }

    fn phi_local(&self, y: usize, nb: &[usize], g: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::PseudoSpherical { gamma } => norm(g, 1.0 + gamma),
            PotentialKind::CompositeLikelihood => self
                .block_positions(y, nb)
                .iter()
                .map(|b| -math::ln_1p(b.iter().map(|&i| g[i]).sum::<f64>()))
                .sum(),
            kind => g.iter().map(|&r| kind.scalar_phi(r).expect("additive")).sum(),
        }
    }

    fn grad_local(&self, y: usize, nb: &[usize], g: &[f64], out: &mut [f64]) {
        match &self.kind {
            PotentialKind::PseudoSpherical { gamma } => {
                let p = 1.0 + gamma;
                let nrm = norm(g, p);
                for (o, &v) in out.iter_mut().zip(g) {
                    *o = math::powf(v / nrm, *gamma);
                }
            }
            PotentialKind::CompositeLikelihood => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for b in self.block_positions(y, nb) {
                    let s: f64 = b.iter().map(|&i| g[i]).sum();
                    for &i in &b {
                        out[i] -= 1.0 / (1.0 + s);
                    }
                }
            }
            kind => {
                for (o, &r) in out.iter_mut().zip(g) {
                    *o = kind.scalar_dphi(r).expect("additive");
                }
            }
        }
    }

    /// Ratio vector `f_{b(y)}/f_y` from log values.
    fn ratios<D: LogDensity + ?Sized>(&self, y: usize, nb: &[usize], f: &D) -> Result<Vec<f64>> {
        let uy = f.log_f(y).ok_or(Error::OutsideSupport(y))?;
        nb.iter()
            .map(|&z| {
                f.log_f(z)
                    .map(|uz| math::exp(uz - uy))
                    .ok_or(Error::OutsideSupport(z))
            })
            .collect()
    }

    /// `S(y, f)` through the general local expansion with indicator terms:
    /// `1[y∈Y₀]{−φ_y(r_y) + Σ_z r_{yz} ∂_zφ_y(r_y)} − Σ_{z∈b(y)∩Y₀} ∂_yφ_z(r_z)`.
    /// Reads `f` on `n(y)` and on `b(z)` for `z ∈ b(y)`.
    pub fn generic_score<D: LogDensity + ?Sized>(&self, y: usize, f: &D) -> Result<f64> {
        self.locality.space().check_point(y)?;
        let nb = self.locality.neighbors(y);
        let mut s = 0.0;
        if self.is_active(y) {
            let g = self.ratios(y, &nb, f)?;
            let mut grad = vec![0.0; g.len()];
            self.grad_local(y, &nb, &g, &mut grad);
            s += -self.phi_local(y, &nb, &g) + g.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
        }
        for &z in &nb {
            if !self.is_active(z) {
                continue;
            }
            let nbz = self.locality.neighbors(z);
            let gz = self.ratios(z, &nbz, f)?;
            let mut grad = vec![0.0; gz.len()];
            self.grad_local(z, &nbz, &gz, &mut grad);
            let pos = nbz.binary_search(&y).expect("symmetric adjacency");
            s -= grad[pos];
        }
        Ok(s)
    }

    /// Additive-kind score `Σ_{z∈b(y)} {1[y∈Y₀](rφ′(r) − φ(r)) − 1[z∈Y₀]φ′(1/r)}`
    /// with `r = f_z/f_y`; reads `f` on `n(y)` only.
    pub fn psi_score<D: LogDensity + ?Sized>(&self, y: usize, f: &D) -> Result<f64> {
        if !self.kind.is_additive() {
            return Err(Error::Unsupported(format!(
                "the ψ path needs an additive potential, not {}",
                self.kind.name()
            )));
        }
        self.locality.space().check_point(y)?;
        let nb = self.locality.neighbors(y);
        let g = self.ratios(y, &nb, f)?;
        let ay = self.is_active(y);
        let mut s = 0.0;
        for (&z, &r) in nb.iter().zip(&g) {
            if ay {
                s += r * self.kind.scalar_dphi(r).unwrap() - self.kind.scalar_phi(r).unwrap();
            }
            if self.is_active(z) {
                s -= self.kind.scalar_dphi(1.0 / r).unwrap();
            }
        }
        Ok(s)
    }

    fn check_full(&self, f: &UnnormalizedVector) -> Result<()> {
        self.locality.space().ensure_enumerable()?;
        if f.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                found: f.len(),
            });
        }
        Ok(())
    }

    /// `φ(f) = Σ_{y∈Y₀} f_y φ_y(f_{b(y)}/f_y)`.
    pub fn composite_potential(&self, f: &UnnormalizedVector) -> Result<f64> {
        self.check_full(f)?;
        let mut total = 0.0;
        for y in self.active.points(self.size()) {
            let nb = self.locality.neighbors(y);
            let g = self.ratios(y, &nb, f)?;
            total += f.value(y) * self.phi_local(y, &nb, &g);
        }
        Ok(total)
    }

    /// Bregman divergence of `φ_y` between two ratio vectors.
    fn local_bregman(&self, y: usize, nb: &[usize], a: &[f64], b: &[f64]) -> (f64, f64) {
        let mut grad = vec![0.0; b.len()];
        self.grad_local(y, nb, b, &mut grad);
        let pa = self.phi_local(y, nb, a);
        let pb = self.phi_local(y, nb, b);
        let lin: f64 = grad.iter().zip(a.iter().zip(b)).map(|(g, (x, z))| g * (x - z)).sum();
        (pa - pb - lin, math::abs(pa) + math::abs(pb) + math::abs(lin))
    }

    /// `D_Φ(f, g) = Σ_{y∈Y₀} f_y D_{φ_y}(f_{b(y)}/f_y, g_{b(y)}/g_y)`.
    ///
    /// Values below zero within `1e-12` of the accumulated magnitude are
    /// clipped; anything more negative is reported as an error.
    pub fn divergence(&self, f: &UnnormalizedVector, g: &UnnormalizedVector) -> Result<f64> {
        self.check_full(f)?;
        self.check_full(g)?;
        let mut total = 0.0;
        let mut scale = 0.0;
        for y in self.active.points(self.size()) {
            let nb = self.locality.neighbors(y);
            let a = self.ratios(y, &nb, f)?;
            let b = self.ratios(y, &nb, g)?;
            let (d, mag) = self.local_bregman(y, &nb, &a, &b);
            let fy = f.value(y);
            total += fy * d;
            scale += fy * mag;
        }
        let tol = DIVERGENCE_TOLERANCE * scale.max(1.0);
        if total < -tol {
            return Err(Error::NegativeDivergence { value: total });
        }
        Ok(total.max(0.0))
    }
}

/// Relative negativity tolerance for divergences.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-12;

/// `‖g‖_p` computed with max scaling.
fn norm(g: &[f64], p: f64) -> f64 {
    let m = g.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = g.iter().map(|&v| math::powf(v / m, p)).sum();
    m * math::powf(s, 1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{hamming_graph, NeighborhoodGraph};
    use crate::space::SampleSpace;
    use alloc::string::ToString;

    fn cube(dim: usize, radius: usize) -> Locality {
        Locality::hamming(dim, radius).unwrap()
    }

    fn pair_graph() -> Locality {
        let space = SampleSpace::enumerated(vec!["a".to_string(), "b".to_string()]).unwrap();
        Locality::graph(NeighborhoodGraph::from_edges(space, &[(0, 1)]).unwrap())
    }

    fn fam(kind: PotentialKind, loc: Locality) -> PotentialFamily {
        PotentialFamily::new(kind, loc).unwrap()
    }

    fn ln2() -> f64 {
        math::ln(2.0)
    }

    #[test]
    fn local_potential_examples() {
        let pl = fam(PotentialKind::PseudoLikelihood, cube(2, 1));
        assert!((pl.local_potential(0, &[1.0, 1.0]).unwrap() + 2.0 * ln2()).abs() < 1e-15);

        let ps = fam(PotentialKind::PseudoSpherical { gamma: 1.0 }, cube(2, 1));
        assert!((ps.local_potential(0, &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-14);

        let rm = fam(PotentialKind::RatioMatching, cube(3, 1));
        assert!((rm.local_potential(0, &[1.0, 1.0, 1.0]).unwrap() + 0.75).abs() < 1e-15);
    }

    #[test]
    fn local_gradient_examples() {
        let pl = fam(PotentialKind::PseudoLikelihood, cube(2, 1));
        assert_eq!(pl.local_potential_gradient(0, &[1.0, 1.0]).unwrap(), vec![-0.5, -0.5]);

        let dp = fam(PotentialKind::DensityPower { gamma: 1.0 }, cube(2, 1));
        assert_eq!(dp.local_potential_gradient(0, &[2.0, 3.0]).unwrap(), vec![2.0, 3.0]);

        let ps = fam(PotentialKind::PseudoSpherical { gamma: 1.0 }, cube(2, 1));
        let g = ps.local_potential_gradient(0, &[3.0, 4.0]).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn local_potential_errors() {
        let pl = fam(PotentialKind::PseudoLikelihood, cube(2, 1));
        assert!(matches!(
            pl.local_potential(0, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let sub = PotentialFamily::with_active_set(
            PotentialKind::PseudoLikelihood,
            cube(2, 1),
            ActiveSet::Subset(vec![0, 3]),
        )
        .unwrap();
        assert!(matches!(sub.local_potential(1, &[1.0, 1.0]), Err(Error::NotActive(1))));
    }

    #[test]
    fn local_gradient_matches_finite_differences() {
        let kinds = [
            PotentialKind::PseudoLikelihood,
            PotentialKind::RatioMatching,
            PotentialKind::DensityPower { gamma: 0.7 },
            PotentialKind::PseudoSpherical { gamma: 2.0 },
            PotentialKind::CompositeLikelihood,
        ];
        let loc = Locality::blocks(crate::blocks::BlockSystem::parse(3, "1,2;2,3").unwrap());
        for kind in kinds {
            let f = fam(kind, loc.clone());
            let nb = loc.neighbors(5);
            let g: Vec<f64> = (0..nb.len()).map(|i| 0.3 + 0.4 * i as f64).collect();
            let grad = f.local_potential_gradient(5, &g).unwrap();
            for i in 0..g.len() {
                let h = 1e-5 * g[i];
                let mut gp = g.clone();
                let mut gm = g.clone();
                gp[i] += h;
                gm[i] -= h;
                let fd = (f.local_potential(5, &gp).unwrap() - f.local_potential(5, &gm).unwrap()) / (2.0 * h);
                assert!(math::rel_diff(fd, grad[i]) < 1e-6, "{:?} {i}: {fd} vs {}", f.kind(), grad[i]);
            }
        }
    }

    #[test]
    fn composite_potential_examples() {
        let pl = fam(PotentialKind::PseudoLikelihood, pair_graph());
        let f = UnnormalizedVector::from_values(&[1.0, 1.0]).unwrap();
        assert!((pl.composite_potential(&f).unwrap() + 2.0 * ln2()).abs() < 1e-15);

        let dp = fam(PotentialKind::DensityPower { gamma: 1.0 }, pair_graph());
        let f = UnnormalizedVector::from_values(&[1.0, 2.0]).unwrap();
        assert!((dp.composite_potential(&f).unwrap() - 2.25).abs() < 1e-14);

        let f7 = f.scaled(7.0);
        let a = dp.composite_potential(&f7).unwrap();
        assert!((a - 7.0 * 2.25).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn scores_at_uniform() {
        let f = UnnormalizedVector::from_values(&[1.0; 4]).unwrap();
        let pl = fam(PotentialKind::PseudoLikelihood, cube(2, 1));
        let rm = fam(PotentialKind::RatioMatching, cube(2, 1));
        for y in 0..4 {
            assert!((pl.generic_score(y, &f).unwrap() - 2.0 * ln2()).abs() < 1e-14);
            assert!((pl.psi_score(y, &f).unwrap() - 2.0 * ln2()).abs() < 1e-14);
            assert!((rm.generic_score(y, &f).unwrap() - 0.5).abs() < 1e-15);
            assert!((rm.psi_score(y, &f).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_identities() {
        let gamma = 1.7;
        for k in -20..=20 {
            let r = math::exp(k as f64 * 0.2);
            let pl = PotentialKind::PseudoLikelihood.psi(r).unwrap();
            assert!(math::rel_diff(pl, math::ln_1p(r)) < 1e-13);
            let rm = PotentialKind::RatioMatching.psi(r).unwrap();
            let expect = 1.0 / ((1.0 + 1.0 / r) * (1.0 + 1.0 / r));
            assert!(math::rel_diff(rm, expect) < 1e-13);
            let dp = PotentialKind::DensityPower { gamma }.psi(r).unwrap();
            let expect = gamma / (1.0 + gamma) * math::powf(r, 1.0 + gamma) - math::powf(r, -gamma);
            assert!(math::rel_diff(dp, expect) < 1e-12);
        }
        assert!(PotentialKind::PseudoSpherical { gamma }.psi(1.0).is_none());
    }

    #[test]
    fn divergence_of_self_is_zero() {
        let f = UnnormalizedVector::from_values(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        for kind in [
            PotentialKind::PseudoLikelihood,
            PotentialKind::PseudoSpherical { gamma: 1.0 },
            PotentialKind::CompositeLikelihood,
        ] {
            let fam = fam(kind, cube(2, 1));
            assert_eq!(fam.divergence(&f, &f).unwrap(), 0.0);
        }
    }

    #[test]
    fn empty_neighborhood_rejected_at_binding() {
        let space = SampleSpace::enumerated(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let g = NeighborhoodGraph::from_edges(space, &[(0, 1)]).unwrap();
        let loc = Locality::graph(g);
        assert!(matches!(
            PotentialFamily::new(PotentialKind::PseudoLikelihood, loc.clone()),
            Err(Error::EmptyNeighborhood(2))
        ));
        assert!(PotentialFamily::with_active_set(
            PotentialKind::PseudoLikelihood,
            loc,
            ActiveSet::Subset(vec![0, 1])
        )
        .is_ok());
    }

    #[test]
    fn invalid_gamma_rejected() {
        assert!(PotentialFamily::new(PotentialKind::DensityPower { gamma: 0.0 }, cube(2, 1)).is_err());
        assert!(PotentialFamily::new(PotentialKind::PseudoSpherical { gamma: -1.0 }, cube(2, 1)).is_err());
    }

    #[test]
    fn generic_score_needs_second_ring_only_for_non_additive() {
        use alloc::collections::BTreeMap;
        let loc = Locality::graph(hamming_graph(3, 1).unwrap());
        let y = 0;
        let mut local = BTreeMap::new();
        local.insert(y, 0.1);
        for z in loc.neighbors(y) {
            local.insert(z, 0.3 * z as f64);
        }
        let pl = fam(PotentialKind::PseudoLikelihood, loc.clone());
        assert!(pl.psi_score(y, &local).is_ok());
        let ps = fam(PotentialKind::PseudoSpherical { gamma: 1.0 }, loc);
        assert!(matches!(ps.generic_score(y, &local), Err(Error::OutsideSupport(_))));
    }
}
