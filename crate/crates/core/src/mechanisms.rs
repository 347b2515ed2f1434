//! Privacy-loss log-likelihood ratios (PLLRs) for the supported mechanisms,
//! their per-step moment profiles, and aggregation into composition-level
//! statistics.
//!
//! For a mechanism with subsampling probability `p` and shift `μ`, one
//! composition step contributes a pair of PLLR variables:
//!
//! * `X` — the log-likelihood ratio log(dP_alt/dP_null) evaluated under the
//!   null distribution of the mechanism output,
//! * `Y` — the same function evaluated under the alternative.
//!
//! Subsampled mechanisms need two *branches* of such pairs (the trade-off
//! function of a subsampled mechanism is not symmetric, so its inverse
//! carries separate information): the `Primary` branch uses the mechanism's
//! own trade-off, the `Inverse` branch its functional inverse, which
//! amounts to negating and swapping the pair: X⁽²⁾ = −Y⁽¹⁾, Y⁽²⁾ = −X⁽¹⁾ in
//! distribution.
//!
//! Concretely, with base noise ξ and the smooth transform
//! `t(ξ) = log(1 − p + p·e^{s(ξ)})`:
//!
//! * Gaussian: `s(ξ) = μξ − μ²/2`, ξ ~ N(0,1) under the null and
//!   ξ ~ (1−p)·N(0,1) + p·N(μ,1) under the alternative;
//! * Laplace: `s(ξ) = |ξ| − |ξ−μ| = clamp(2ξ−μ, −μ, μ)`, ξ ~ Lap(0,1) under
//!   the null and the analogous (1−p)/p mixture under the alternative. The
//!   clamp makes the PLLR constant on two half-lines, so the law has point
//!   masses at both support endpoints.
//!
//! The alternative mixture puts weight `p` on the *shifted* component; this
//! is the convention under which the defining density-ratio identity
//! f_Y(t) = e^t·f_X(t) holds exactly (checked in tests on a fine grid).

use crate::error::{Error, Result};
use crate::quad;
use crate::special::phi;

/// Which noise family a composition step uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismKind {
    /// Gaussian noise on a subsampled query; `mu = 1/sigma`.
    SubsampledGaussian,
    /// Laplace noise on a subsampled query; `mu` is the sensitivity/scale shift.
    SubsampledLaplace,
    /// Gaussian without subsampling (`p = 1`); kept separate because it has a
    /// single PLLR branch and fully closed-form moments.
    PureGaussian,
}

/// One mechanism step: noise family, shift `μ ≥ 0`, subsampling `p ∈ [0,1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    pub mu: f64,
    pub p: f64,
}

/// PLLR family selector; see the module docs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PllrBranch {
    Primary,
    Inverse,
}

/// Which member of the PLLR pair: `X` (null) or `Y` (alternative).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variable {
    X,
    Y,
}

impl MechanismSpec {
    pub fn new(kind: MechanismKind, mu: f64, p: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu must be finite and >= 0, got {mu}"
            )));
        }
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in [0, 1], got {p}"
            )));
        }
        if kind == MechanismKind::PureGaussian && p != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "PureGaussian requires p = 1, got p = {p}"
            )));
        }
        Ok(MechanismSpec { kind, mu, p })
    }

    /// Subsampled Gaussian given the noise multiplier σ (so `mu = 1/σ`).
    pub fn subsampled_gaussian(sigma: f64, p: f64) -> Result<Self> {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and > 0, got {sigma}"
            )));
        }
        Self::new(MechanismKind::SubsampledGaussian, 1.0 / sigma, p)
    }

    pub fn subsampled_laplace(mu: f64, p: f64) -> Result<Self> {
        Self::new(MechanismKind::SubsampledLaplace, mu, p)
    }

    pub fn pure_gaussian(mu: f64) -> Result<Self> {
        Self::new(MechanismKind::PureGaussian, mu, 1.0)
    }

    /// True when the step releases nothing (`p = 0` or `μ = 0`): both PLLRs
    /// are identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.p == 0.0 || self.mu == 0.0
    }

    /// The PLLR branches this mechanism contributes. PureGaussian trade-off
    /// functions are symmetric, so the inverse branch adds nothing there.
    pub fn branches(&self) -> &'static [PllrBranch] {
        match self.kind {
            MechanismKind::PureGaussian => &[PllrBranch::Primary],
            _ => &[PllrBranch::Primary, PllrBranch::Inverse],
        }
    }

    pub(crate) fn supports_branch(&self, branch: PllrBranch) -> bool {
        self.branches().contains(&branch)
    }
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

/// Gaussian-family PLLR transform t(ξ) = log(1 − p + p·e^{μξ − μ²/2}).
#[inline]
pub(crate) fn gauss_transform(mu: f64, p: f64, xi: f64) -> f64 {
    let w = mu * xi - 0.5 * mu * mu;
    if p == 1.0 {
        w
    } else {
        (p * w.exp_m1()).ln_1p()
    }
}

/// Inverse of `gauss_transform` in ξ (the transform is strictly increasing
/// for μ > 0, p > 0). Input must be inside the open support (log(1−p), ∞).
pub(crate) fn gauss_transform_inv(mu: f64, p: f64, v: f64) -> f64 {
    if p == 1.0 {
        return (v + 0.5 * mu * mu) / mu;
    }
    // e^w = 1 + expm1(v)/p; for large v work in logs to dodge overflow.
    let w = if v > 700.0 {
        v - p.ln()
    } else {
        (v.exp_m1() / p).ln_1p()
    };
    (w + 0.5 * mu * mu) / mu
}

/// Laplace-family PLLR transform; constant outside ξ ∈ [0, μ].
#[inline]
pub(crate) fn laplace_transform(mu: f64, p: f64, xi: f64) -> f64 {
    let w = (2.0 * xi - mu).clamp(-mu, mu);
    (p * w.exp_m1()).ln_1p()
}

/// Laplace(0, 1) density.
#[inline]
pub(crate) fn laplace_pdf(x: f64) -> f64 {
    0.5 * (-x.abs()).exp()
}

/// Laplace(0, 1) CDF.
#[inline]
pub(crate) fn laplace_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * x.exp()
    } else {
        1.0 - 0.5 * (-x).exp()
    }
}

// ---------------------------------------------------------------------------
// Single-step PLLR law
// ---------------------------------------------------------------------------

/// The full law of one PLLR variable: absolutely continuous density plus
/// (for Laplace) point masses at the support endpoints.
pub struct PllrDistribution {
    /// Support of the absolutely continuous part (open interval; endpoints
    /// may be ±∞ for Gaussian mechanisms).
    pub support: (f64, f64),
    /// Point masses as (location, mass); empty for Gaussian mechanisms.
    pub atoms: Vec<(f64, f64)>,
    density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    cdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl PllrDistribution {
    /// Density of the absolutely continuous part at `v` (0 outside support).
    pub fn density(&self, v: f64) -> f64 {
        (self.density)(v)
    }

    /// Right-continuous CDF P(T ≤ v), including atom masses.
    pub fn cdf(&self, v: f64) -> f64 {
        (self.cdf)(v)
    }

    fn atom_mass_at(&self, v: f64) -> f64 {
        self.atoms
            .iter()
            .find(|(loc, _)| *loc == v)
            .map_or(0.0, |(_, m)| *m)
    }

    /// Law of −T. Exact: support reflected, atoms negated, CDF complemented
    /// with the atom at the boundary handled so the result stays
    /// right-continuous.
    fn negated(self) -> PllrDistribution {
        let atoms: Vec<(f64, f64)> = self.atoms.iter().map(|&(loc, m)| (-loc, m)).collect();
        let support = (-self.support.1, -self.support.0);
        let inner = std::sync::Arc::new(self);
        let d = inner.clone();
        let c = inner.clone();
        PllrDistribution {
            support,
            atoms,
            density: Box::new(move |v| d.density(-v)),
            cdf: Box::new(move |v| 1.0 - c.cdf(-v) + c.atom_mass_at(-v)),
        }
    }
}

/// Point mass at zero (degenerate step: `p = 0` or `μ = 0`).
fn point_mass_at_zero() -> PllrDistribution {
    PllrDistribution {
        support: (0.0, 0.0),
        atoms: vec![(0.0, 1.0)],
        density: Box::new(|_| 0.0),
        cdf: Box::new(|v| if v >= 0.0 { 1.0 } else { 0.0 }),
    }
}

fn gauss_pllr_distribution(mu: f64, p: f64, variable: Variable) -> PllrDistribution {
    let lo = if p == 1.0 {
        f64::NEG_INFINITY
    } else {
        (-p).ln_1p()
    };
    let base_pdf = move |xi: f64| match variable {
        Variable::X => phi(xi),
        Variable::Y => (1.0 - p) * phi(xi) + p * phi(xi - mu),
    };
    let base_cdf = move |xi: f64| match variable {
        Variable::X => crate::special::norm_cdf(xi),
        Variable::Y => {
            (1.0 - p) * crate::special::norm_cdf(xi) + p * crate::special::norm_cdf(xi - mu)
        }
    };
    // t'(ξ) = μ·p·e^{s}/(1−p+p·e^{s}) with s = μξ − μ²/2; in terms of the
    // output value v: t'= μ·(1 − (1−p)e^{-v}).
    let density = move |v: f64| {
        if v <= lo {
            return 0.0;
        }
        let xi = gauss_transform_inv(mu, p, v);
        let deriv = mu * (1.0 - (1.0 - p) * (-v).exp());
        base_pdf(xi) / deriv
    };
    let cdf = move |v: f64| {
        if v <= lo {
            0.0
        } else {
            base_cdf(gauss_transform_inv(mu, p, v))
        }
    };
    PllrDistribution {
        support: (lo, f64::INFINITY),
        atoms: Vec::new(),
        density: Box::new(density),
        cdf: Box::new(cdf),
    }
}

fn laplace_pllr_distribution(mu: f64, p: f64, variable: Variable) -> PllrDistribution {
    let v_lo = (p * (-mu).exp_m1()).ln_1p();
    let v_hi = (p * mu.exp_m1()).ln_1p();
    let base_pdf = move |xi: f64| match variable {
        Variable::X => laplace_pdf(xi),
        Variable::Y => (1.0 - p) * laplace_pdf(xi) + p * laplace_pdf(xi - mu),
    };
    let base_cdf = move |xi: f64| match variable {
        Variable::X => laplace_cdf(xi),
        Variable::Y => (1.0 - p) * laplace_cdf(xi) + p * laplace_cdf(xi - mu),
    };
    // Mass of the plateaus: ξ ≤ 0 maps to v_lo, ξ ≥ μ maps to v_hi.
    let mass_lo = base_cdf(0.0);
    let mass_hi = 1.0 - base_cdf(mu);
    // On v ∈ (v_lo, v_hi): v = log(1−p+p·e^{2ξ−μ}), so
    // ξ = (log((e^v−1+p)/p) + μ)/2 and dv/dξ = 2(1 − (1−p)e^{−v}).
    let inv = move |v: f64| ((v.exp_m1() / p).ln_1p() + mu) / 2.0;
    let density = move |v: f64| {
        if v <= v_lo || v >= v_hi {
            return 0.0;
        }
        let deriv = 2.0 * (1.0 - (1.0 - p) * (-v).exp());
        base_pdf(inv(v)) / deriv
    };
    let cdf = move |v: f64| {
        if v < v_lo {
            0.0
        } else if v >= v_hi {
            1.0
        } else {
            base_cdf(inv(v))
        }
    };
    PllrDistribution {
        support: (v_lo, v_hi),
        atoms: vec![(v_lo, mass_lo), (v_hi, mass_hi)],
        density: Box::new(density),
        cdf: Box::new(cdf),
    }
}

/// The law of one PLLR variable for `(spec, branch)`.
pub fn pllr_distribution(
    spec: &MechanismSpec,
    branch: PllrBranch,
    variable: Variable,
) -> Result<PllrDistribution> {
    if !spec.supports_branch(branch) {
        return Err(Error::UnsupportedConfiguration(format!(
            "{:?} has no {:?} PLLR branch",
            spec.kind, branch
        )));
    }
    if spec.is_degenerate() {
        return Ok(point_mass_at_zero());
    }
    // Inverse branch: X⁽²⁾ = −Y⁽¹⁾ and Y⁽²⁾ = −X⁽¹⁾ in distribution.
    let (primary_variable, negate) = match branch {
        PllrBranch::Primary => (variable, false),
        PllrBranch::Inverse => (
            match variable {
                Variable::X => Variable::Y,
                Variable::Y => Variable::X,
            },
            true,
        ),
    };
    let dist = match spec.kind {
        MechanismKind::SubsampledGaussian | MechanismKind::PureGaussian => {
            gauss_pllr_distribution(spec.mu, spec.p, primary_variable)
        }
        MechanismKind::SubsampledLaplace => {
            laplace_pllr_distribution(spec.mu, spec.p, primary_variable)
        }
    };
    Ok(if negate { dist.negated() } else { dist })
}

/// The `(f_X, f_Y)` pair of single-step PLLR laws for one branch.
pub fn pllr_density_pair(
    spec: &MechanismSpec,
    branch: PllrBranch,
) -> Result<(PllrDistribution, PllrDistribution)> {
    Ok((
        pllr_distribution(spec, branch, Variable::X)?,
        pllr_distribution(spec, branch, Variable::Y)?,
    ))
}

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

/// Per-step moment profile of one PLLR variable.
///
/// `central[r-2]` holds the central moment of order r for r = 2..6;
/// cumulants follow the standard identities k₃ = γ₃, k₄ = γ₄ − 3γ₂²,
/// k₅ = γ₅ − 10γ₃γ₂.
#[derive(Clone, Copy, Debug)]
pub struct MomentProfile {
    pub branch: PllrBranch,
    pub variable: Variable,
    pub mean: f64,
    pub central: [f64; 5],
    /// E|T − mean|.
    pub abs_first: f64,
    /// E|T − mean|³.
    pub abs_central3: f64,
    /// E|T − mean|⁴.
    pub abs_central4: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    /// Degenerate step (`p = 0` or `μ = 0`): the PLLR is identically zero.
    pub point_mass: bool,
}

impl MomentProfile {
    pub fn variance(&self) -> f64 {
        self.central[0]
    }

    fn zero(branch: PllrBranch, variable: Variable) -> MomentProfile {
        MomentProfile {
            branch,
            variable,
            mean: 0.0,
            central: [0.0; 5],
            abs_first: 0.0,
            abs_central3: 0.0,
            abs_central4: 0.0,
            k3: 0.0,
            k4: 0.0,
            k5: 0.0,
            point_mass: true,
        }
    }

    /// Whether the third central moment is meaningfully nonzero (beyond
    /// quadrature noise at the standardized scale).
    pub fn has_nonzero_third(&self) -> bool {
        let scale = self.variance().powf(1.5);
        scale > 0.0 && self.k3.abs() > 1e-12 * scale
    }
}

/// Expectation building blocks for one (mechanism, branch, variable): a list
/// of (weight at point) atoms plus a smooth part ∫ g(t(ξ))·b(ξ) dξ.
struct ExpectationPlan {
    /// Quadrature domain on the base-noise axis.
    domain: (f64, f64),
    /// Forced breakpoints (mixture mode at ξ = μ for Gaussian; none needed
    /// for Laplace where the domain is already the smooth strip (0, μ)).
    breakpoints: Vec<f64>,
    transform: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    base_pdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    atoms: Vec<(f64, f64)>,
}

impl ExpectationPlan {
    fn expect<G: Fn(f64) -> f64>(&self, g: G, extra_breaks: &[f64]) -> Result<f64> {
        let mut pts = vec![self.domain.0];
        for &b in self.breakpoints.iter().chain(extra_breaks) {
            if b > self.domain.0 && b < self.domain.1 {
                pts.push(b);
            }
        }
        pts.push(self.domain.1);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let smooth = quad::integrate_split(
            |xi| g((self.transform)(xi)) * (self.base_pdf)(xi),
            &pts,
            1e-12,
            1e-10,
        )?;
        let atom_part: f64 = self.atoms.iter().map(|&(v, m)| m * g(v)).sum();
        Ok(smooth.value + atom_part)
    }
}

fn expectation_plan(
    spec: &MechanismSpec,
    branch: PllrBranch,
    variable: Variable,
) -> ExpectationPlan {
    let (base_variable, negate) = match branch {
        PllrBranch::Primary => (variable, false),
        PllrBranch::Inverse => (
            match variable {
                Variable::X => Variable::Y,
                Variable::Y => Variable::X,
            },
            true,
        ),
    };
    let mu = spec.mu;
    let p = spec.p;
    let sign = if negate { -1.0 } else { 1.0 };
    match spec.kind {
        MechanismKind::SubsampledGaussian | MechanismKind::PureGaussian => {
            // ±12 standard deviations of the base noise cover mass 1-2e-33;
            // the mixture needs the window extended past its second mode.
            let domain = match base_variable {
                Variable::X => (-12.0, 12.0),
                Variable::Y => (-12.0, 12.0 + mu),
            };
            let base_pdf: Box<dyn Fn(f64) -> f64 + Send + Sync> = match base_variable {
                Variable::X => Box::new(phi),
                Variable::Y => Box::new(move |xi| (1.0 - p) * phi(xi) + p * phi(xi - mu)),
            };
            ExpectationPlan {
                domain,
                breakpoints: vec![0.0, mu],
                transform: Box::new(move |xi| sign * gauss_transform(mu, p, xi)),
                base_pdf,
                atoms: Vec::new(),
            }
        }
        MechanismKind::SubsampledLaplace => {
            // Outside ξ ∈ [0, μ] the transform is constant; fold those tails
            // into exact atom masses and integrate only the smooth strip.
            let base_cdf = |xi: f64| match base_variable {
                Variable::X => laplace_cdf(xi),
                Variable::Y => (1.0 - p) * laplace_cdf(xi) + p * laplace_cdf(xi - mu),
            };
            let v_lo = (p * (-mu).exp_m1()).ln_1p();
            let v_hi = (p * mu.exp_m1()).ln_1p();
            let atoms = vec![
                (sign * v_lo, base_cdf(0.0)),
                (sign * v_hi, 1.0 - base_cdf(mu)),
            ];
            let base_pdf: Box<dyn Fn(f64) -> f64 + Send + Sync> = match base_variable {
                Variable::X => Box::new(laplace_pdf),
                Variable::Y => {
                    Box::new(move |xi| (1.0 - p) * laplace_pdf(xi) + p * laplace_pdf(xi - mu))
                }
            };
            ExpectationPlan {
                domain: (0.0, mu),
                breakpoints: Vec::new(),
                transform: Box::new(move |xi| sign * laplace_transform(mu, p, xi)),
                base_pdf,
                atoms,
            }
        }
    }
}

/// Numerically integrate the moment profile of one PLLR variable.
///
/// Deterministic for fixed quadrature settings; all moments are finite
/// because the PLLRs are bounded below (Gaussian) or bounded on both sides
/// (Laplace) with sub-Gaussian base tails.
pub fn pllr_moments(
    spec: &MechanismSpec,
    branch: PllrBranch,
    variable: Variable,
) -> Result<MomentProfile> {
    if !spec.supports_branch(branch) {
        return Err(Error::UnsupportedConfiguration(format!(
            "{:?} has no {:?} PLLR branch",
            spec.kind, branch
        )));
    }
    if spec.is_degenerate() {
        return Ok(MomentProfile::zero(branch, variable));
    }
    let plan = expectation_plan(spec, branch, variable);
    let mean = plan.expect(|t| t, &[])?;
    // Absolute-moment integrands have a kink where t(ξ) crosses the mean;
    // hand the location to the quadrature as a breakpoint.
    let mean_crossing = mean_crossing_breakpoints(spec, branch, variable, mean);
    let mut central = [0.0; 5];
    for (i, c) in central.iter_mut().enumerate() {
        let r = (i + 2) as i32;
        *c = plan.expect(|t| (t - mean).powi(r), &[])?;
    }
    let abs_first = plan.expect(|t| (t - mean).abs(), &mean_crossing)?;
    let abs_central3 = plan.expect(|t| (t - mean).abs().powi(3), &mean_crossing)?;
    let abs_central4 = central[2]; // even power: E|T−m|⁴ = γ₄
    let g2 = central[0];
    let g3 = central[1];
    let g4 = central[2];
    let g5 = central[3];
    Ok(MomentProfile {
        branch,
        variable,
        mean,
        central,
        abs_first,
        abs_central3,
        abs_central4,
        k3: g3,
        k4: g4 - 3.0 * g2 * g2,
        k5: g5 - 10.0 * g3 * g2,
        point_mass: false,
    })
}

/// Base-axis location(s) where t(ξ) (or −t) equals the mean, for quadrature
/// breakpoints in absolute-moment integrands.
fn mean_crossing_breakpoints(
    spec: &MechanismSpec,
    branch: PllrBranch,
    variable: Variable,
    mean: f64,
) -> Vec<f64> {
    let mu = spec.mu;
    let p = spec.p;
    let target = match branch {
        PllrBranch::Primary => mean,
        PllrBranch::Inverse => -mean,
    };
    let _ = variable;
    let xi = match spec.kind {
        MechanismKind::SubsampledGaussian | MechanismKind::PureGaussian => {
            let lo = if p == 1.0 { f64::NEG_INFINITY } else { (-p).ln_1p() };
            if target <= lo {
                return Vec::new();
            }
            gauss_transform_inv(mu, p, target)
        }
        MechanismKind::SubsampledLaplace => {
            let v_lo = (p * (-mu).exp_m1()).ln_1p();
            let v_hi = (p * mu.exp_m1()).ln_1p();
            if target <= v_lo || target >= v_hi {
                return Vec::new();
            }
            ((target.exp_m1() / p).ln_1p() + mu) / 2.0
        }
    };
    if xi.is_finite() {
        vec![xi]
    } else {
        Vec::new()
    }
}

// ---------------------------------------------------------------------------
// Composition statistics
// ---------------------------------------------------------------------------

/// Aggregated m-fold composition quantities for one (branch, variable).
///
/// With per-step means μᵢ and central moments γ_{r,i}:
///
/// * `big_m`  = Σ μᵢ            (mean of the sum)
/// * `b`      = √(Σ γ₂,ᵢ)       (standard deviation of the sum)
/// * `b_bar`  = b/√m            (root-mean-square per-step deviation)
/// * `lambda_r` = (1/m)·Σ k_{r,i} / b̄ʳ   (standardized cumulant averages)
/// * `k3_abs` = (1/m)·Σ E|Tᵢ−μᵢ|³ / b̄³,  `k4_abs` analogous at order 4
/// * `k3_tilde` = k3_abs + (1/m)·Σ E|Tᵢ−μᵢ|·γ₂,ᵢ / b̄³
#[derive(Clone, Copy, Debug)]
pub struct CompositionStats {
    pub m: u64,
    pub big_m: f64,
    pub b: f64,
    pub b_bar: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    /// Average standardized third absolute moment K₃.
    pub k3_abs: f64,
    /// Average standardized fourth absolute moment K₄.
    pub k4_abs: f64,
    /// K̃₃ = K₃ + (1/m)·Σ E|Tᵢ−μᵢ|·γ₂,ᵢ / b̄³.
    pub k3_tilde: f64,
    /// Some step has a nonzero third central moment.
    pub nonzero_third: bool,
    /// All steps degenerate: the sum is a point mass at `big_m` (= 0).
    pub degenerate: bool,
}

/// Aggregate per-step profiles (weighted by counts) into composition
/// statistics. Cost is linear in the number of *distinct* profiles, so an
/// identical m-fold composition is O(1) regardless of m.
pub fn composition_stats(profiles: &[(MomentProfile, u64)]) -> Result<CompositionStats> {
    let m: u64 = profiles.iter().map(|(_, c)| *c).sum();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "composition must contain at least one step".into(),
        ));
    }
    let mf = m as f64;
    let mut big_m = 0.0;
    let mut var_sum = 0.0;
    let mut k3_sum = 0.0;
    let mut k4_sum = 0.0;
    let mut k5_sum = 0.0;
    let mut abs3_sum = 0.0;
    let mut abs4_sum = 0.0;
    let mut abs1_var_sum = 0.0;
    let mut nonzero_third = false;
    for (profile, count) in profiles {
        let c = *count as f64;
        big_m += c * profile.mean;
        var_sum += c * profile.variance();
        k3_sum += c * profile.k3;
        k4_sum += c * profile.k4;
        k5_sum += c * profile.k5;
        abs3_sum += c * profile.abs_central3;
        abs4_sum += c * profile.abs_central4;
        abs1_var_sum += c * profile.abs_first * profile.variance();
        nonzero_third |= profile.has_nonzero_third();
    }
    if var_sum <= 0.0 {
        return Ok(CompositionStats {
            m,
            big_m,
            b: 0.0,
            b_bar: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            lambda5: 0.0,
            k3_abs: 0.0,
            k4_abs: 0.0,
            k3_tilde: 0.0,
            nonzero_third: false,
            degenerate: true,
        });
    }
    let b = var_sum.sqrt();
    let b_bar = b / mf.sqrt();
    let b3 = b_bar.powi(3);
    let b4 = b_bar.powi(4);
    let b5 = b_bar.powi(5);
    Ok(CompositionStats {
        m,
        big_m,
        b,
        b_bar,
        lambda3: k3_sum / (mf * b3),
        lambda4: k4_sum / (mf * b4),
        lambda5: k5_sum / (mf * b5),
        k3_abs: abs3_sum / (mf * b3),
        k4_abs: abs4_sum / (mf * b4),
        k3_tilde: (abs3_sum + abs1_var_sum) / (mf * b3),
        nonzero_third,
        degenerate: false,
    })
}

/// Convenience: the i.i.d. composition statistics for m copies of one step.
pub fn iid_stats(
    spec: &MechanismSpec,
    m: u64,
    branch: PllrBranch,
    variable: Variable,
) -> Result<CompositionStats> {
    let profile = pllr_moments(spec, branch, variable)?;
    composition_stats(&[(profile, m)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pure_gaussian_x_is_normal_with_mean_minus_half() {
        // PLLR of N(0,1) vs N(1,1): μξ − μ²/2 with μ = 1 → N(−1/2, 1).
        let spec = MechanismSpec::pure_gaussian(1.0).unwrap();
        let prof = pllr_moments(&spec, PllrBranch::Primary, Variable::X).unwrap();
        assert_abs_diff_eq!(prof.mean, -0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(prof.variance(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(prof.k3, 0.0, epsilon = 1e-12);
        assert!(!prof.has_nonzero_third());

        let dist = pllr_distribution(&spec, PllrBranch::Primary, Variable::X).unwrap();
        for v in [-2.0, -0.5, 0.0, 1.5] {
            assert_abs_diff_eq!(dist.density(v), phi(v + 0.5), epsilon = 1e-12);
            assert_abs_diff_eq!(
                dist.cdf(v),
                crate::special::norm_cdf(v + 0.5),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn degenerate_steps_are_point_masses() {
        for spec in [
            MechanismSpec::subsampled_gaussian(1.0, 0.0).unwrap(),
            MechanismSpec::new(MechanismKind::SubsampledGaussian, 0.0, 0.3).unwrap(),
            MechanismSpec::subsampled_laplace(0.0, 0.2).unwrap(),
        ] {
            let prof = pllr_moments(&spec, PllrBranch::Primary, Variable::X).unwrap();
            assert!(prof.point_mass);
            assert_eq!(prof.mean, 0.0);
            assert_eq!(prof.variance(), 0.0);
            let dist = pllr_distribution(&spec, PllrBranch::Primary, Variable::Y).unwrap();
            assert_eq!(dist.atoms, vec![(0.0, 1.0)]);
        }
    }

    #[test]
    fn pure_gaussian_rejects_subsampling_and_inverse_branch() {
        assert!(MechanismSpec::new(MechanismKind::PureGaussian, 1.0, 0.5).is_err());
        let spec = MechanismSpec::pure_gaussian(1.0).unwrap();
        assert!(pllr_moments(&spec, PllrBranch::Inverse, Variable::X).is_err());
        assert_eq!(spec.branches(), &[PllrBranch::Primary]);
    }

    #[test]
    fn parameter_validation() {
        assert!(MechanismSpec::subsampled_gaussian(0.0, 0.1).is_err());
        assert!(MechanismSpec::subsampled_gaussian(1.0, -0.1).is_err());
        assert!(MechanismSpec::subsampled_gaussian(1.0, 1.1).is_err());
        assert!(MechanismSpec::subsampled_laplace(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn laplace_pllr_is_bounded() {
        let spec = MechanismSpec::subsampled_laplace(1.0, 0.1).unwrap();
        let bound = (0.1f64 * 1.0f64.exp_m1()).ln_1p().abs().max(
            (0.1f64 * (-1.0f64).exp_m1()).ln_1p().abs(),
        );
        for branch in [PllrBranch::Primary, PllrBranch::Inverse] {
            for variable in [Variable::X, Variable::Y] {
                let dist = pllr_distribution(&spec, branch, variable).unwrap();
                assert!(dist.support.0 >= -bound - 1e-15);
                assert!(dist.support.1 <= bound + 1e-15);
                let total_atom_mass: f64 = dist.atoms.iter().map(|(_, m)| m).sum();
                assert!(total_atom_mass > 0.0 && total_atom_mass < 1.0);
            }
        }
    }

    #[test]
    fn laplace_atoms_and_smooth_part_sum_to_one() {
        let spec = MechanismSpec::subsampled_laplace(1.3, 0.25).unwrap();
        for variable in [Variable::X, Variable::Y] {
            let dist = pllr_distribution(&spec, PllrBranch::Primary, variable).unwrap();
            let atom_mass: f64 = dist.atoms.iter().map(|(_, m)| m).sum();
            let smooth = quad::integrate(
                |v| dist.density(v),
                dist.support.0,
                dist.support.1,
                1e-12,
                1e-10,
            )
            .unwrap();
            assert_abs_diff_eq!(atom_mass + smooth.value, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn cumulant_identity_k4_holds_exactly_as_computed() {
        let spec = MechanismSpec::subsampled_gaussian(0.8, 0.01).unwrap();
        let prof = pllr_moments(&spec, PllrBranch::Primary, Variable::X).unwrap();
        let expected = prof.central[2] - 3.0 * prof.central[0] * prof.central[0];
        assert_eq!(prof.k4, expected);
        assert_eq!(prof.k3, prof.central[1]);
    }

    #[test]
    fn heterogeneous_aggregation_equals_expanded_list() {
        let a = pllr_moments(
            &MechanismSpec::subsampled_gaussian(0.8, 0.02).unwrap(),
            PllrBranch::Primary,
            Variable::X,
        )
        .unwrap();
        let b = pllr_moments(
            &MechanismSpec::subsampled_laplace(1.0, 0.1).unwrap(),
            PllrBranch::Primary,
            Variable::X,
        )
        .unwrap();
        let grouped = composition_stats(&[(a, 10), (b, 5)]).unwrap();
        let mut expanded = Vec::new();
        for _ in 0..10 {
            expanded.push((a, 1));
        }
        for _ in 0..5 {
            expanded.push((b, 1));
        }
        let flat = composition_stats(&expanded).unwrap();
        assert_eq!(grouped.m, flat.m);
        assert_eq!(grouped.big_m, flat.big_m);
        assert_eq!(grouped.b, flat.b);
        assert_eq!(grouped.lambda3, flat.lambda3);
        assert_eq!(grouped.k3_tilde, flat.k3_tilde);
    }

    #[test]
    fn single_profile_stats_scale_as_sqrt_m() {
        let spec = MechanismSpec::subsampled_gaussian(1.0, 0.05).unwrap();
        let prof = pllr_moments(&spec, PllrBranch::Primary, Variable::X).unwrap();
        let stats = composition_stats(&[(prof, 400)]).unwrap();
        assert_abs_diff_eq!(stats.b, (400.0 * prof.variance()).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(stats.b_bar, prof.variance().sqrt(), epsilon = 1e-12);
        // Standardized cumulant averages for i.i.d. steps equal the
        // single-step standardized cumulants.
        assert_abs_diff_eq!(
            stats.lambda3,
            prof.k3 / prof.variance().powf(1.5),
            epsilon = 1e-12
        );
    }
}
