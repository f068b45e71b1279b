//! Score evaluation for estimation: log-domain local scores with their
//! gradients in `log f`, the named closed forms, the standard composite
//! likelihood, and the score-kind grammar.
//!
//! All ratios are formed as `exp(log f_z − log f_y)`; models only ever
//! expose `log f`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::blocks::BlockSystem;
use crate::density::{LogDensity, Probability};
use crate::error::{Error, Result};
use crate::locality::Locality;
use crate::math;
use crate::potential::{ActiveSet, PotentialFamily, PotentialKind};

/// Sparse gradient of a score with respect to `log f`, as `(point, ∂S/∂log f_point)`
/// entries. Points may repeat.
pub type LogGradient = Vec<(usize, f64)>;

#[inline]
fn logf<D: LogDensity + ?Sized>(f: &D, z: usize) -> Result<f64> {
    f.log_f(z).ok_or(Error::OutsideSupport(z))
}

/// A scoring rule ready for evaluation on unnormalized models.
#[derive(Debug, Clone)]
pub enum ScoringRule {
    /// Gradient score of a local potential family (proper).
    Homogeneous(PotentialFamily),
    /// Standard composite likelihood `Σ_ℓ −log q(y | n_ℓ(y))`; proper only
    /// when every block neighborhood is an equivalence function.
    CompositeLikelihood(Locality),
}

impl ScoringRule {
    pub fn locality(&self) -> &Locality {
        match self {
            ScoringRule::Homogeneous(f) => f.locality(),
            ScoringRule::CompositeLikelihood(l) => l,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScoringRule::Homogeneous(f) => f.kind().name(),
            ScoringRule::CompositeLikelihood(_) => "cl".into(),
        }
    }

    /// Whether evaluation reads `f` beyond `n(y)`.
    pub fn needs_second_ring(&self) -> bool {
        match self {
            ScoringRule::Homogeneous(f) => !f.kind().is_additive(),
            ScoringRule::CompositeLikelihood(_) => false,
        }
    }

    /// `S(y, f)`.
    pub fn score<D: LogDensity + ?Sized>(&self, y: usize, f: &D) -> Result<f64> {
        self.evaluate(y, f, None)
    }

    /// `S(y, f)`, appending `∂S/∂log f_z` entries to `grad` when given.
    pub fn evaluate<D: LogDensity + ?Sized>(
        &self,
        y: usize,
        f: &D,
        grad: Option<&mut LogGradient>,
    ) -> Result<f64> {
        self.locality().space().check_point(y)?;
        match self {
            ScoringRule::Homogeneous(fam) => match fam.kind() {
                PotentialKind::PseudoSpherical { gamma } => {
                    pseudo_spherical(fam.locality(), fam.active_set(), *gamma, y, f, grad)
                }
                PotentialKind::CompositeLikelihood => {
                    modified_cl(fam.locality(), fam.active_set(), y, f, grad)
                }
                _ => additive(fam, y, f, grad),
            },
            ScoringRule::CompositeLikelihood(loc) => standard_cl(loc, y, f, grad),
        }
    }

    /// `S(p, f) = Σ_y p_y S(y, f)` over an enumerable space.
    pub fn expected_score<D: LogDensity + ?Sized>(&self, p: &Probability, f: &D) -> Result<f64> {
        let space = self.locality().space();
        space.ensure_enumerable()?;
        if p.len() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                found: p.len(),
            });
        }
        let mut total = 0.0;
        for (y, &w) in p.weights().iter().enumerate() {
            total += w * self.score(y, f)?;
        }
        Ok(total)
    }
}

impl PotentialFamily {
    /// `S(y, f) = −∂φ(f)/∂f_y`. Additive kinds read only `n(y)`; the
    /// others also read `b(z)` for `z ∈ b(y)`.
    pub fn score<D: LogDensity + ?Sized>(&self, y: usize, f: &D) -> Result<f64> {
        ScoringRule::Homogeneous(self.clone()).evaluate(y, f, None)
    }

    /// `S(p, f) = Σ_y p_y S(y, f)`.
    pub fn expected_score<D: LogDensity + ?Sized>(&self, p: &Probability, f: &D) -> Result<f64> {
        ScoringRule::Homogeneous(self.clone()).expected_score(p, f)
    }
}

fn additive<D: LogDensity + ?Sized>(
    fam: &PotentialFamily,
    y: usize,
    f: &D,
    mut grad: Option<&mut LogGradient>,
) -> Result<f64> {
    let kind = fam.kind();
    let loc = fam.locality();
    let uy = logf(f, y)?;
    let ay = if fam.is_active(y) { 1.0 } else { 0.0 };
    let mut nb = Vec::new();
    loc.neighbors_into(y, &mut nb);
    let mut total = 0.0;
    let mut dy = 0.0;
    for &z in &nb {
        let t = logf(f, z)? - uy;
        let az = if fam.is_active(z) { 1.0 } else { 0.0 };
        let (value, slope) = match kind {
            PotentialKind::PseudoLikelihood => {
                let s = math::sigmoid(t);
                (
                    ay * (math::softplus(t) - s) + az * s,
                    ay * s * s + az * s * (1.0 - s),
                )
            }
            PotentialKind::RatioMatching => {
                let s = math::sigmoid(t);
                (0.5 * (ay + az) * s * s, (ay + az) * s * s * (1.0 - s))
            }
            PotentialKind::DensityPower { gamma } => {
                let up = math::exp((1.0 + gamma) * t);
                let down = math::exp(-gamma * t);
                (
                    ay * gamma / (1.0 + gamma) * up - az * down,
                    ay * gamma * up + az * gamma * down,
                )
            }
            PotentialKind::CustomAdditive(c) => {
                let r = math::exp(t);
                let value = ay * (r * (c.dphi)(r) - (c.phi)(r)) - az * (c.dphi)(1.0 / r);
                let slope = if grad.is_some() {
                    let d2 = c.d2phi.ok_or_else(|| {
                        Error::Unsupported(format!(
                            "custom potential '{}' has no second derivative",
                            c.name
                        ))
                    })?;
                    ay * r * r * d2(r) + az * d2(1.0 / r) / r
                } else {
                    0.0
                };
                (value, slope)
            }
            _ => unreachable!("non-additive kinds are dispatched elsewhere"),
        };
        total += value;
        if let Some(g) = grad.as_deref_mut() {
            g.push((z, slope));
            dy -= slope;
        }
    }
    if let Some(g) = grad {
        g.push((y, dy));
    }
    Ok(total)
}

/// Local pseudo-spherical score
/// `−Σ_{z∈b(y)∩Y₀} ‖f_{b(z)}/f_y‖_{1+γ}^{−γ}`.
fn pseudo_spherical<D: LogDensity + ?Sized>(
    loc: &Locality,
    active: &ActiveSet,
    gamma: f64,
    y: usize,
    f: &D,
    mut grad: Option<&mut LogGradient>,
) -> Result<f64> {
    let p = 1.0 + gamma;
    let kappa = gamma / p;
    let uy = logf(f, y)?;
    let mut nb = Vec::new();
    let mut nbz = Vec::new();
    let mut vals = Vec::new();
    loc.neighbors_into(y, &mut nb);
    let mut total = 0.0;
    for &z in &nb {
        if !active.contains(z) {
            continue;
        }
        loc.neighbors_into(z, &mut nbz);
        vals.clear();
        for &w in &nbz {
            vals.push(p * (logf(f, w)? - uy));
        }
        let lse = math::log_sum_exp_slice(&vals);
        let e = math::exp(-kappa * lse);
        total -= e;
        if let Some(g) = grad.as_deref_mut() {
            // ∂/∂u_w = γ e softmax_w, ∂/∂u_y = −γ e
            for (&w, &v) in nbz.iter().zip(&vals) {
                g.push((w, gamma * e * math::exp(v - lse)));
            }
            g.push((y, -gamma * e));
        }
    }
    Ok(total)
}

/// `L_ℓ(v) = log Σ_{w∈n_ℓ(v)} f_w − log f_v = −log q(v | n_ℓ(v))`, with the
/// softmax weights over `b_ℓ(v)` written to `weights`.
fn block_log_odds<D: LogDensity + ?Sized>(
    uv: f64,
    block: &[usize],
    f: &D,
    weights: &mut Vec<f64>,
) -> Result<f64> {
    weights.clear();
    let mut max = 0.0f64;
    for &w in block {
        let t = logf(f, w)? - uv;
        weights.push(t);
        max = max.max(t);
    }
    let mut sum = math::exp(-max);
    for t in weights.iter() {
        sum += math::exp(t - max);
    }
    let l = max + math::ln(sum);
    for t in weights.iter_mut() {
        *t = math::exp(*t - l);
    }
    Ok(l)
}

/// Gradient-exact composite likelihood
/// `1[y∈Y₀] Σ_ℓ {L_ℓ(y) − 1 + e^{−L_ℓ(y)}} + Σ_{z∈b(y)∩Y₀} Σ_{ℓ: y∈b_ℓ(z)} e^{−L_ℓ(z)}`.
fn modified_cl<D: LogDensity + ?Sized>(
    loc: &Locality,
    active: &ActiveSet,
    y: usize,
    f: &D,
    mut grad: Option<&mut LogGradient>,
) -> Result<f64> {
    let uy = logf(f, y)?;
    let mut blocks = Vec::new();
    let mut weights = Vec::new();
    let mut total = 0.0;
    if active.contains(y) {
        loc.blocks_into(y, &mut blocks);
        for block in &blocks {
            let l = block_log_odds(uy, block, f, &mut weights)?;
            let e = math::exp(-l);
            total += l + libm::expm1(-l);
            if let Some(g) = grad.as_deref_mut() {
                let c = 1.0 - e;
                for (&w, &s) in block.iter().zip(&weights) {
                    g.push((w, c * s));
                }
                // softmax weight of y itself is e^{−L}
                g.push((y, c * (e - 1.0)));
            }
        }
    }
    let mut nb = Vec::new();
    loc.neighbors_into(y, &mut nb);
    for &z in &nb {
        if !active.contains(z) {
            continue;
        }
        let uz = logf(f, z)?;
        loc.blocks_into(z, &mut blocks);
        for (l_idx, block) in blocks.iter().enumerate() {
            if !loc.in_block(z, l_idx, y) {
                continue;
            }
            let l = block_log_odds(uz, block, f, &mut weights)?;
            let e = math::exp(-l);
            total += e;
            if let Some(g) = grad.as_deref_mut() {
                for (&w, &s) in block.iter().zip(&weights) {
                    g.push((w, -e * s));
                }
                g.push((z, -e * (e - 1.0)));
            }
        }
    }
    Ok(total)
}

/// Standard composite likelihood `Σ_ℓ log(1 + Σ_{z∈b_ℓ(y)} f_z/f_y)`.
fn standard_cl<D: LogDensity + ?Sized>(
    loc: &Locality,
    y: usize,
    f: &D,
    mut grad: Option<&mut LogGradient>,
) -> Result<f64> {
    let uy = logf(f, y)?;
    let mut blocks = Vec::new();
    let mut weights = Vec::new();
    loc.blocks_into(y, &mut blocks);
    let mut total = 0.0;
    for block in &blocks {
        let l = block_log_odds(uy, block, f, &mut weights)?;
        total += l;
        if let Some(g) = grad.as_deref_mut() {
            for (&w, &s) in block.iter().zip(&weights) {
                g.push((w, s));
            }
            g.push((y, math::exp(-l) - 1.0));
        }
    }
    Ok(total)
}

/// Standard composite likelihood score for a block system on `{±1}^D`.
pub fn cl_score<D: LogDensity + ?Sized>(blocks: &BlockSystem, y: usize, f: &D) -> Result<f64> {
    standard_cl(&Locality::blocks(blocks.clone()), y, f, None)
}

/// Named closed-form scores evaluated directly on ratios, independent of
/// the log-domain evaluation used for fitting. Assumes `Y₀ = Y`.
pub fn closed_form_score<D: LogDensity + ?Sized>(fam: &PotentialFamily, y: usize, f: &D) -> Result<f64> {
    if fam.active_set() != &ActiveSet::All {
        return Err(Error::Unsupported("closed forms assume Y₀ = Y".into()));
    }
    let loc = fam.locality();
    loc.space().check_point(y)?;
    let fy = math::exp(logf(f, y)?);
    let val = |z: usize| -> Result<f64> { Ok(math::exp(logf(f, z)?)) };
    let nb = loc.neighbors(y);
    let mut s = 0.0;
    match fam.kind() {
        PotentialKind::PseudoLikelihood => {
            for &z in &nb {
                s += math::ln(1.0 + val(z)? / fy);
            }
        }
        PotentialKind::RatioMatching => {
            for &z in &nb {
                let d = 1.0 + fy / val(z)?;
                s += 1.0 / (d * d);
            }
        }
        PotentialKind::DensityPower { gamma } => {
            for &z in &nb {
                let fz = val(z)?;
                s += gamma / (1.0 + gamma) * math::powf(fz / fy, 1.0 + gamma) - math::powf(fy / fz, *gamma);
            }
        }
        PotentialKind::PseudoSpherical { gamma } => {
            let p = 1.0 + gamma;
            for &z in &nb {
                let mut acc = 0.0;
                for w in loc.neighbors(z) {
                    acc += math::powf(val(w)? / fy, p);
                }
                s -= math::powf(math::powf(acc, 1.0 / p), -gamma);
            }
        }
        PotentialKind::CompositeLikelihood => {
            // Σ_ℓ {−log q(y|n_ℓ(y)) + Σ_{z: y∈n_ℓ(z)} q(z|n_ℓ(z)) − 1}
            let cond = |v: usize, block: &[usize]| -> Result<f64> {
                let fv = val(v)?;
                let mut tot = fv;
                for &w in block {
                    tot += val(w)?;
                }
                Ok(fv / tot)
            };
            let mut blocks = Vec::new();
            let mut zblocks = Vec::new();
            loc.blocks_into(y, &mut blocks);
            for (l, block) in blocks.iter().enumerate() {
                s += -math::ln(cond(y, block)?) - 1.0;
                // z = y contributes through y ∈ n_ℓ(y)
                s += cond(y, block)?;
                for &z in &nb {
                    loc.blocks_into(z, &mut zblocks);
                    if loc.in_block(z, l, y) {
                        s += cond(z, &zblocks[l])?;
                    }
                }
            }
        }
        PotentialKind::CustomAdditive(c) => {
            return Err(Error::Unsupported(format!(
                "custom potential '{}' has no closed form; use the ψ path",
                c.name
            )))
        }
    }
    Ok(s)
}

/// Parsed score-kind specification:
/// `pl | rm | dp:<γ> | ps:<γ> | cl[:<blocks>] | mcl[:<blocks>]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreSpec {
    Pl,
    Rm,
    Dp(f64),
    Ps(f64),
    Cl(Option<String>),
    Mcl(Option<String>),
}

impl ScoreSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h, Some(a.trim())),
            None => (text, None),
        };
        let gamma = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::Parse(format!("'{head}' needs a gamma, e.g. {head}:1")))?;
            let g: f64 = a.parse().map_err(|_| Error::Parse(format!("bad gamma '{a}'")))?;
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Parse(format!("gamma must be positive, got {g}")));
            }
            Ok(g)
        };
        let no_arg = |a: Option<&str>| -> Result<()> {
            match a {
                None => Ok(()),
                Some(a) => Err(Error::Parse(format!("'{head}' takes no argument, got '{a}'"))),
            }
        };
        match head.to_ascii_lowercase().as_str() {
            "pl" => no_arg(arg).map(|_| ScoreSpec::Pl),
            "rm" => no_arg(arg).map(|_| ScoreSpec::Rm),
            "dp" => gamma(arg).map(ScoreSpec::Dp),
            "ps" => gamma(arg).map(ScoreSpec::Ps),
            "cl" => Ok(ScoreSpec::Cl(arg.map(String::from))),
            "mcl" => Ok(ScoreSpec::Mcl(arg.map(String::from))),
            other => Err(Error::Parse(format!("unknown score kind '{other}'"))),
        }
    }

    pub fn blocks(&self) -> Option<&str> {
        match self {
            ScoreSpec::Cl(b) | ScoreSpec::Mcl(b) => b.as_deref(),
            _ => None,
        }
    }

    /// Binds the spec to a neighborhood. Block arguments replace the given
    /// locality with the block system on the same hypercube.
    pub fn build(&self, locality: Locality) -> Result<ScoringRule> {
        let locality = match self.blocks() {
            Some(text) => {
                let dim = locality.space().hypercube_dim().ok_or_else(|| {
                    Error::InvalidInput("block systems require a hypercube space".into())
                })?;
                Locality::blocks(BlockSystem::parse(dim, text)?)
            }
            None => locality,
        };
        let kind = match self {
            ScoreSpec::Pl => PotentialKind::PseudoLikelihood,
            ScoreSpec::Rm => PotentialKind::RatioMatching,
            ScoreSpec::Dp(g) => PotentialKind::DensityPower { gamma: *g },
            ScoreSpec::Ps(g) => PotentialKind::PseudoSpherical { gamma: *g },
            ScoreSpec::Mcl(_) => PotentialKind::CompositeLikelihood,
            ScoreSpec::Cl(_) => return Ok(ScoringRule::CompositeLikelihood(locality)),
        };
        Ok(ScoringRule::Homogeneous(PotentialFamily::new(kind, locality)?))
    }
}

impl core::fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ScoreSpec::Pl => write!(f, "pl"),
            ScoreSpec::Rm => write!(f, "rm"),
            ScoreSpec::Dp(g) => write!(f, "dp:{g}"),
            ScoreSpec::Ps(g) => write!(f, "ps:{g}"),
            ScoreSpec::Cl(None) => write!(f, "cl"),
            ScoreSpec::Cl(Some(b)) => write!(f, "cl:{b}"),
            ScoreSpec::Mcl(None) => write!(f, "mcl"),
            ScoreSpec::Mcl(Some(b)) => write!(f, "mcl:{b}"),
        }
    }
}
