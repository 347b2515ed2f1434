//! Composition accounting: assembles per-step PLLR moments, Edgeworth
//! series, and finite-sample bounds into δ(ε) points and ε(δ) inversions,
//! combining PLLR branches by supremum.
//!
//! Four modes share one request type. `Aea` evaluates the Edgeworth point
//! estimate at the requested order; `Clt` is the order-0 special case;
//! `Eeai` adds the order-1 interval [δ⁻, δ⁺] built from the uniform bound
//! (sharpened by the exponential tail bounds where they apply); `Oracle`
//! delegates to the FFT reference for single-mechanism compositions.
//!
//! δ values are clamped into [0, 1] only at the output boundary; the raw
//! branch values stay available on [`PrivacyPoint::per_branch`] so that
//! diagnostics can see how far the series strayed.

use crate::bounds::{
    gaussian_tail_bound_with, gaussian_tail_params, laplace_tail_bound_with, laplace_tail_params,
    uniform_bound_order1, LaplaceTailParams, TailBoundParams, UniformBoundInputs,
    DEFAULT_SMOOTHING_EPS,
};
use crate::edgeworth::{EdgeworthSeries, MAX_ORDER};
use crate::error::{Error, Result};
use crate::mechanisms::{
    composition_stats, pllr_moments, MechanismKind, MechanismSpec, MomentProfile, PllrBranch,
    Variable,
};
use crate::oracle::{scaled_exp, DeltaOracle};
use crate::root::find_root;
use crate::special::{norm_quantile, norm_sf};

/// Absolute tolerance on ε for every root solve in this module.
const EPS_ROOT_TOL: f64 = 1e-9;

/// Hard ceiling for geometric bracket widening. An ε beyond this is not a
/// meaningful privacy parameter; reaching it means the curve never crossed
/// the target and the caller gets a diagnostic error instead of a root.
const EPS_HARD_CAP: f64 = 1e7;

/// How a request is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Central-limit reference: the order-0 approximation alone.
    Clt,
    /// Edgeworth point estimate at the requested order.
    Aea,
    /// Order-1 point estimate plus the finite-sample interval [δ⁻, δ⁺].
    Eeai,
    /// FFT reference oracle; single distinct mechanism only.
    Oracle,
}

/// What the request asks for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    /// Evaluate δ at this ε (must be positive and finite).
    Epsilon(f64),
    /// Invert the curve at this δ (must lie in [0, 1); inversion itself
    /// additionally requires δ > 0).
    Delta(f64),
}

/// An immutable accounting request: the composition, the evaluation mode,
/// the Edgeworth order, and the target parameter.
#[derive(Clone, Debug)]
pub struct AccountantRequest {
    /// Mechanism steps with repetition counts (all counts ≥ 1). Equal specs
    /// are merged before evaluation, so `[(a, 2)]` and `[(a, 1), (a, 1)]`
    /// produce bit-identical results.
    pub composition: Vec<(MechanismSpec, u64)>,
    pub mode: Mode,
    /// Edgeworth order in 0..=3. EEAI requires order 1 (the only order with
    /// implemented finite-sample bounds); CLT requires order 0.
    pub order: usize,
    pub target: Target,
    /// Smoothing parameter of the uniform bound's remainder (EEAI only).
    pub smoothing_eps: f64,
}

impl AccountantRequest {
    pub fn new(
        composition: Vec<(MechanismSpec, u64)>,
        mode: Mode,
        order: usize,
        target: Target,
    ) -> Result<Self> {
        if composition.is_empty() {
            return Err(Error::InvalidParameter(
                "composition must contain at least one step".into(),
            ));
        }
        for (spec, count) in &composition {
            if *count == 0 {
                return Err(Error::InvalidParameter(
                    "step counts must be at least 1".into(),
                ));
            }
            if !(spec.mu.is_finite() && spec.mu >= 0.0 && spec.p >= 0.0 && spec.p <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "mechanism step out of domain: mu = {}, p = {}",
                    spec.mu, spec.p
                )));
            }
        }
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "order must be 0..={MAX_ORDER}, got {order}"
            )));
        }
        match mode {
            Mode::Eeai if order != 1 => {
                return Err(Error::InvalidParameter(format!(
                    "EEAI carries finite-sample bounds only at order 1, got order {order}"
                )));
            }
            Mode::Clt if order != 0 => {
                return Err(Error::InvalidParameter(format!(
                    "CLT mode is the order-0 approximation, got order {order}"
                )));
            }
            _ => {}
        }
        match target {
            Target::Epsilon(e) if !(e > 0.0 && e.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "target epsilon must be positive and finite, got {e}"
                )));
            }
            Target::Delta(d) if !(0.0..1.0).contains(&d) => {
                return Err(Error::InvalidParameter(format!(
                    "target delta must lie in [0, 1), got {d}"
                )));
            }
            _ => {}
        }
        Ok(AccountantRequest {
            composition,
            mode,
            order,
            target,
            smoothing_eps: DEFAULT_SMOOTHING_EPS,
        })
    }

    pub fn with_smoothing_eps(mut self, smoothing_eps: f64) -> Result<Self> {
        if !(smoothing_eps > 0.0 && smoothing_eps < 1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing_eps must lie in (0, 1/3), got {smoothing_eps}"
            )));
        }
        self.smoothing_eps = smoothing_eps;
        Ok(self)
    }
}

/// Raw (unclamped) per-branch δ values at one ε. Bounds are present only in
/// EEAI mode.
#[derive(Clone, Copy, Debug)]
pub struct BranchDelta {
    pub branch: PllrBranch,
    pub raw_lower: Option<f64>,
    pub raw_est: f64,
    pub raw_upper: Option<f64>,
}

/// δ(ε) at one point. The top-level fields take the supremum over branches
/// and are clamped into [0, 1]; `per_branch` keeps the raw values.
#[derive(Clone, Debug)]
pub struct PrivacyPoint {
    pub epsilon: f64,
    /// EEAI lower envelope; `None` in the other modes.
    pub delta_lower: Option<f64>,
    pub delta_est: f64,
    /// EEAI upper envelope; `None` in the other modes.
    pub delta_upper: Option<f64>,
    /// The branch supremum before clamping, for diagnostics.
    pub raw_delta_est: f64,
    /// Empty for a degenerate (identity) composition.
    pub per_branch: Vec<BranchDelta>,
}

/// ε(δ) inversion result. `eps_lower`/`eps_upper` are EEAI-only; `eps_upper`
/// is `+∞` when the upper envelope plateaus at or above the target δ, i.e.
/// the interval does not localize ε from above at this composition length.
#[derive(Clone, Copy, Debug)]
pub struct EpsilonPoint {
    pub delta: f64,
    pub eps_lower: Option<f64>,
    pub eps_est: f64,
    pub eps_upper: Option<f64>,
}

/// One evaluated point: δ at ε or ε at δ, depending on the request target.
#[derive(Clone, Debug)]
pub enum Evaluation {
    DeltaAt(PrivacyPoint),
    EpsilonAt(EpsilonPoint),
}

/// One entry of a privacy curve. Failures are reported per point rather
/// than aborting the sweep.
#[derive(Debug)]
pub struct CurvePoint {
    pub m: u64,
    pub result: Result<Evaluation>,
}

// ---------------------------------------------------------------------------
// Blueprint: per-spec work that does not depend on the repetition count
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
enum TailEval {
    Gauss(TailBoundParams),
    Laplace(LaplaceTailParams),
}

impl TailEval {
    fn eval(&self, m: u64, eps: f64) -> f64 {
        match self {
            TailEval::Gauss(p) => gaussian_tail_bound_with(p, m, eps),
            TailEval::Laplace(p) => laplace_tail_bound_with(p, m, eps),
        }
    }
}

const BRANCHES: [PllrBranch; 2] = [PllrBranch::Primary, PllrBranch::Inverse];

struct BlueprintStep {
    spec: MechanismSpec,
    count: u64,
    /// `profiles[branch][variable]`; the inverse slot falls back to the
    /// primary profile for single-branch mechanisms, whose PLLR pair is
    /// symmetric (X⁽²⁾ = −Y⁽¹⁾ has the law of X⁽¹⁾ there).
    profiles: [[MomentProfile; 2]; 2],
    /// X-sum tail sharpening per branch; populated only for single-spec
    /// EEAI requests (the exponential bounds are stated for repeated runs
    /// of one mechanism).
    tails: [Option<TailEval>; 2],
}

struct Blueprint {
    steps: Vec<BlueprintStep>,
    two_branch: bool,
    eeai: bool,
    order: usize,
    smoothing_eps: f64,
}

/// Merge equal specs, summing counts, preserving first-occurrence order.
fn canonical(composition: &[(MechanismSpec, u64)]) -> Vec<(MechanismSpec, u64)> {
    let mut out: Vec<(MechanismSpec, u64)> = Vec::new();
    for (spec, count) in composition {
        if let Some((_, c)) = out.iter_mut().find(|(s, _)| s == spec) {
            *c += count;
        } else {
            out.push((*spec, *count));
        }
    }
    out
}

/// Exponential X-sum tail bound for one branch, when one applies: the
/// Gaussian bound covers the primary branch of subsampled Gaussian steps,
/// the Laplace bound covers both branches. Neither is used without
/// subsampling (p = 1 has closed-form behaviour the bounds were not tuned
/// for) or for degenerate steps.
fn tail_for(spec: &MechanismSpec, branch: PllrBranch) -> Result<Option<TailEval>> {
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Ok(None);
    }
    match spec.kind {
        MechanismKind::SubsampledGaussian if branch == PllrBranch::Primary => {
            Ok(gaussian_tail_params(spec)?.map(TailEval::Gauss))
        }
        MechanismKind::SubsampledLaplace => {
            Ok(laplace_tail_params(spec)?.map(TailEval::Laplace))
        }
        _ => Ok(None),
    }
}

fn blueprint(req: &AccountantRequest) -> Result<Blueprint> {
    let comp = canonical(&req.composition);
    let eeai = req.mode == Mode::Eeai;
    let single = comp.len() == 1;
    let mut steps = Vec::with_capacity(comp.len());
    for (spec, count) in comp {
        let xp = pllr_moments(&spec, PllrBranch::Primary, Variable::X)?;
        let yp = pllr_moments(&spec, PllrBranch::Primary, Variable::Y)?;
        let (xi, yi) = if spec.branches().contains(&PllrBranch::Inverse) {
            (
                pllr_moments(&spec, PllrBranch::Inverse, Variable::X)?,
                pllr_moments(&spec, PllrBranch::Inverse, Variable::Y)?,
            )
        } else {
            (xp, yp)
        };
        let tails = if eeai && single && !spec.is_degenerate() {
            [
                tail_for(&spec, PllrBranch::Primary)?,
                tail_for(&spec, PllrBranch::Inverse)?,
            ]
        } else {
            [None, None]
        };
        steps.push(BlueprintStep {
            spec,
            count,
            profiles: [[xp, yp], [xi, yi]],
            tails,
        });
    }
    let two_branch = steps
        .iter()
        .any(|s| s.spec.branches().contains(&PllrBranch::Inverse));
    Ok(Blueprint {
        steps,
        two_branch,
        eeai,
        order: req.order,
        smoothing_eps: req.smoothing_eps,
    })
}

// ---------------------------------------------------------------------------
// Prepared evaluators for a fixed total composition length
// ---------------------------------------------------------------------------

struct IntervalParts {
    delta_x: f64,
    delta_y: f64,
    tail: Option<TailEval>,
}

struct BranchEval {
    branch: PllrBranch,
    gx: EdgeworthSeries,
    gy: EdgeworthSeries,
    interval: Option<IntervalParts>,
}

impl BranchEval {
    /// Point estimate: Eq.-style δ̂ = 1 − G_Y(ε) − e^ε(1 − G_X(ε)) with the
    /// raw series values clipped into [0, 1] first (the series stands in
    /// for a CDF; without the clip, e^ε amplifies its tail excursions).
    fn delta_hat(&self, eps: f64) -> f64 {
        let gx = self.gx.cdf(eps).clamp(0.0, 1.0);
        let gy = self.gy.cdf(eps).clamp(0.0, 1.0);
        1.0 - gy - scaled_exp(eps, 1.0 - gx)
    }

    /// Raw (δ⁻, δ⁺) built from CDF envelopes G ± Δ clipped into [0, 1],
    /// with the lower X envelope sharpened by the exponential tail bound
    /// where one applies.
    fn interval_raw(&self, m: u64, eps: f64) -> Option<(f64, f64)> {
        let parts = self.interval.as_ref()?;
        let gx = self.gx.cdf(eps);
        let gy = self.gy.cdf(eps);
        let fx_hi = (gx + parts.delta_x).clamp(0.0, 1.0);
        let mut fx_lo = (gx - parts.delta_x).clamp(0.0, 1.0);
        if let Some(tail) = &parts.tail {
            fx_lo = fx_lo.max(1.0 - tail.eval(m, eps));
        }
        let fy_lo = (gy - parts.delta_y).clamp(0.0, 1.0);
        let fy_hi = (gy + parts.delta_y).clamp(0.0, 1.0);
        let hi = 1.0 - fy_lo - scaled_exp(eps, 1.0 - fx_hi);
        let lo = 1.0 - fy_hi - scaled_exp(eps, 1.0 - fx_lo);
        Some((lo, hi))
    }
}

struct Prepared {
    m: u64,
    degenerate: bool,
    eeai: bool,
    branches: Vec<BranchEval>,
}

impl Prepared {
    fn est_clamped(&self, eps: f64) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        self.branches
            .iter()
            .map(|b| b.delta_hat(eps))
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(0.0, 1.0)
    }

    fn lower_clamped(&self, eps: f64) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        self.branches
            .iter()
            .filter_map(|b| b.interval_raw(self.m, eps).map(|(lo, _)| lo))
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(0.0, 1.0)
    }

    fn upper_clamped(&self, eps: f64) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        self.branches
            .iter()
            .filter_map(|b| b.interval_raw(self.m, eps).map(|(_, hi)| hi))
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(0.0, 1.0)
    }

    /// Limit of the clamped upper envelope as ε → ∞: the Y-side uniform
    /// bound survives after both series saturate and the e^ε term dies off.
    /// Used to tell a true plateau (ε⁺ = ∞) from a bracketing failure.
    fn upper_plateau(&self) -> f64 {
        self.branches
            .iter()
            .filter_map(|b| b.interval.as_ref().map(|p| p.delta_y))
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(0.0, 1.0)
    }
}

/// Build evaluators for the blueprint at either its own counts or, for
/// curve sweeps over a single spec, an overridden total length.
fn instantiate(bp: &Blueprint, sweep_m: Option<u64>) -> Result<Prepared> {
    debug_assert!(sweep_m.is_none() || bp.steps.len() == 1);
    let branch_count = if bp.two_branch { 2 } else { 1 };
    let mut branches = Vec::with_capacity(branch_count);
    let mut degenerate = false;
    let mut m_total = 0;
    for (bi, &branch) in BRANCHES.iter().take(branch_count).enumerate() {
        let count_of = |s: &BlueprintStep| sweep_m.unwrap_or(s.count);
        let profs_x: Vec<(MomentProfile, u64)> = bp
            .steps
            .iter()
            .map(|s| (s.profiles[bi][0], count_of(s)))
            .collect();
        let profs_y: Vec<(MomentProfile, u64)> = bp
            .steps
            .iter()
            .map(|s| (s.profiles[bi][1], count_of(s)))
            .collect();
        let stats_x = composition_stats(&profs_x)?;
        let stats_y = composition_stats(&profs_y)?;
        m_total = stats_x.m;
        if bi == 0 {
            degenerate = stats_x.degenerate;
        }
        let interval = if bp.eeai && !stats_x.degenerate {
            let dx = uniform_bound_order1(&UniformBoundInputs::new(stats_x, bp.smoothing_eps)?)?;
            let dy = uniform_bound_order1(&UniformBoundInputs::new(stats_y, bp.smoothing_eps)?)?;
            Some(IntervalParts {
                delta_x: dx,
                delta_y: dy,
                tail: bp.steps[0].tails[bi],
            })
        } else {
            None
        };
        branches.push(BranchEval {
            branch,
            gx: EdgeworthSeries::new(bp.order, stats_x)?,
            gy: EdgeworthSeries::new(bp.order, stats_y)?,
            interval,
        });
    }
    Ok(Prepared {
        m: m_total,
        degenerate,
        eeai: bp.eeai,
        branches,
    })
}

// ---------------------------------------------------------------------------
// δ at ε
// ---------------------------------------------------------------------------

fn delta_point(prep: &Prepared, eps: f64) -> PrivacyPoint {
    if prep.degenerate {
        // Identity trade-off: δ(ε) = 0 exactly for every ε > 0.
        let bound = if prep.eeai { Some(0.0) } else { None };
        return PrivacyPoint {
            epsilon: eps,
            delta_lower: bound,
            delta_est: 0.0,
            delta_upper: bound,
            raw_delta_est: 0.0,
            per_branch: Vec::new(),
        };
    }
    let mut per_branch = Vec::with_capacity(prep.branches.len());
    let mut raw_est = f64::NEG_INFINITY;
    let mut raw_lo = f64::NEG_INFINITY;
    let mut raw_hi = f64::NEG_INFINITY;
    let mut has_interval = false;
    for be in &prep.branches {
        let est = be.delta_hat(eps);
        let interval = be.interval_raw(prep.m, eps);
        raw_est = raw_est.max(est);
        if let Some((lo, hi)) = interval {
            raw_lo = raw_lo.max(lo);
            raw_hi = raw_hi.max(hi);
            has_interval = true;
        }
        per_branch.push(BranchDelta {
            branch: be.branch,
            raw_lower: interval.map(|(lo, _)| lo),
            raw_est: est,
            raw_upper: interval.map(|(_, hi)| hi),
        });
    }
    PrivacyPoint {
        epsilon: eps,
        delta_lower: has_interval.then(|| raw_lo.clamp(0.0, 1.0)),
        delta_est: raw_est.clamp(0.0, 1.0),
        delta_upper: has_interval.then(|| raw_hi.clamp(0.0, 1.0)),
        raw_delta_est: raw_est,
        per_branch,
    }
}

fn oracle_only_spec(req: &AccountantRequest) -> Result<(MechanismSpec, u64)> {
    let comp = canonical(&req.composition);
    if comp.len() != 1 {
        return Err(Error::UnsupportedConfiguration(format!(
            "the FFT oracle handles repeated runs of a single mechanism; \
             the composition has {} distinct specs",
            comp.len()
        )));
    }
    Ok(comp[0])
}

fn oracle_delta_point(req: &AccountantRequest, eps: f64) -> Result<PrivacyPoint> {
    let (spec, m) = oracle_only_spec(req)?;
    let orc = DeltaOracle::new(&spec, m)?;
    let mut per_branch = Vec::new();
    let mut raw_est = f64::NEG_INFINITY;
    for &branch in spec.branches() {
        if let Some(raw) = orc.branch_delta_at(branch, eps) {
            raw_est = raw_est.max(raw);
            per_branch.push(BranchDelta {
                branch,
                raw_lower: None,
                raw_est: raw,
                raw_upper: None,
            });
        }
    }
    let est = orc.delta_at(eps);
    if per_branch.is_empty() {
        raw_est = est;
    }
    Ok(PrivacyPoint {
        epsilon: eps,
        delta_lower: None,
        delta_est: est,
        delta_upper: None,
        raw_delta_est: raw_est,
        per_branch,
    })
}

/// δ at the request's target ε, in the request's mode.
pub fn delta_at_epsilon(req: &AccountantRequest) -> Result<PrivacyPoint> {
    let eps = match req.target {
        Target::Epsilon(e) => e,
        Target::Delta(_) => {
            return Err(Error::InvalidParameter(
                "request targets delta; use epsilon_at_delta".into(),
            ));
        }
    };
    if req.mode == Mode::Oracle {
        return oracle_delta_point(req, eps);
    }
    let prep = instantiate(&blueprint(req)?, None)?;
    Ok(delta_point(&prep, eps))
}

// ---------------------------------------------------------------------------
// ε at δ
// ---------------------------------------------------------------------------

/// Analytic search ceiling for ε roots: the smaller of two normal-quantile
/// bounds, `min{m·ln(pδ/(1−Φ(z_δ+μ))), ln(δ/(1−Φ((z_{δ/√m}+μ)/√m)))}`,
/// keeping only finite positive candidates. When δ/√m underflows the
/// quantile, only the first term is considered. This is a bracket for root
/// searches, not a privacy statement.
fn analytic_epsilon_ceiling(spec: &MechanismSpec, m: u64, delta: f64) -> Option<f64> {
    let (mu, p) = (spec.mu, spec.p);
    if !(delta > 0.0 && delta < 1.0 && p > 0.0 && p <= 1.0) {
        return None;
    }
    let mf = m as f64;
    let mut best: Option<f64> = None;
    let mut push = |c: f64| {
        if c.is_finite() && c > 0.0 {
            best = Some(best.map_or(c, |b: f64| b.min(c)));
        }
    };
    let z1 = norm_quantile(1.0 - delta);
    let den1 = norm_sf(z1 + mu);
    if den1 > 0.0 && p * delta / den1 > 0.0 {
        push(mf * (p * delta / den1).ln());
    }
    let q = delta / mf.sqrt();
    if q > 0.0 && q < 1.0 {
        let z2 = norm_quantile(1.0 - q);
        if z2.is_finite() {
            let den2 = norm_sf((z2 + mu) / mf.sqrt());
            if den2 > 0.0 {
                push((delta / den2).ln());
            }
        }
    }
    best
}

/// Search ceiling for ε-root brackets and containment grids: the analytic
/// quantile bound when it yields a positive finite value, otherwise four
/// times the order-1 point-estimate root (and at least 1).
#[derive(Clone, Copy, Debug)]
pub struct SearchCeiling {
    pub epsilon: f64,
    /// Whether the analytic bound (rather than the scaled-root fallback)
    /// produced the value.
    pub analytic: bool,
}

pub fn epsilon_search_ceiling(spec: &MechanismSpec, m: u64, delta: f64) -> Result<SearchCeiling> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if let Some(c) = analytic_epsilon_ceiling(spec, m, delta) {
        return Ok(SearchCeiling {
            epsilon: c,
            analytic: true,
        });
    }
    let req = AccountantRequest::new(vec![(*spec, m)], Mode::Aea, 1, Target::Delta(delta))?;
    let root = epsilon_at_delta(&req)?.eps_est;
    Ok(SearchCeiling {
        epsilon: (4.0 * root).max(1.0),
        analytic: false,
    })
}

/// Smallest nonnegative root of `curve(ε) = delta` for a curve that starts
/// at or above δ and eventually descends below it. The optional hint seeds
/// the bracket top; widening proceeds geometrically up to the hard cap.
fn smallest_root<F: Fn(f64) -> f64>(
    curve: F,
    delta: f64,
    hint: Option<f64>,
    context: &'static str,
) -> Result<f64> {
    if curve(0.0) <= delta {
        return Ok(0.0);
    }
    let mut hi = match hint {
        Some(c) if c.is_finite() && c > 0.0 && curve(c) <= delta => c,
        Some(c) if c.is_finite() && c > 0.0 => c.max(1.0),
        _ => 1.0,
    };
    while curve(hi) > delta {
        hi *= 2.0;
        if hi > EPS_HARD_CAP {
            return Err(Error::numeric(
                context,
                format!(
                    "curve still above delta = {delta:.3e} at eps = {:.3e} \
                     (curve value {:.3e}); no bracket below the hard cap",
                    EPS_HARD_CAP,
                    curve(EPS_HARD_CAP)
                ),
            ));
        }
    }
    find_root(|e| curve(e) - delta, 0.0, hi, EPS_ROOT_TOL)
}

/// Largest root of `curve(ε) = delta` for a curve that is eventually
/// monotone down to `plateau`: geometric scan remembering the last point
/// above δ, then bisection. Returns 0 when the curve never exceeds δ and
/// +∞ when it plateaus at or above δ.
fn largest_root<F: Fn(f64) -> f64>(
    curve: F,
    delta: f64,
    plateau: f64,
    context: &'static str,
) -> Result<f64> {
    let mut last_above = if curve(0.0) > delta { Some(0.0) } else { None };
    let mut b = 1.0;
    while b <= EPS_HARD_CAP {
        if curve(b) > delta {
            last_above = Some(b);
        }
        b *= 2.0;
    }
    let Some(a) = last_above else {
        return Ok(0.0);
    };
    let top = b.min(EPS_HARD_CAP);
    if curve(top) > delta {
        return if plateau >= delta {
            Ok(f64::INFINITY)
        } else {
            Err(Error::numeric(
                context,
                format!(
                    "curve is above delta = {delta:.3e} at the hard cap {top:.3e} \
                     yet its plateau {plateau:.3e} lies below delta; no finite bracket"
                ),
            ))
        };
    }
    find_root(|e| curve(e) - delta, a, top, EPS_ROOT_TOL)
}

/// ε at the request's target δ, in the request's mode.
pub fn epsilon_at_delta(req: &AccountantRequest) -> Result<EpsilonPoint> {
    let delta = match req.target {
        Target::Delta(d) => d,
        Target::Epsilon(_) => {
            return Err(Error::InvalidParameter(
                "request targets epsilon; use delta_at_epsilon".into(),
            ));
        }
    };
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "inversion needs delta in (0, 1), got {delta}"
        )));
    }
    if req.mode == Mode::Oracle {
        let (spec, m) = oracle_only_spec(req)?;
        let orc = DeltaOracle::new(&spec, m)?;
        return Ok(EpsilonPoint {
            delta,
            eps_lower: None,
            eps_est: orc.epsilon_at(delta)?,
            eps_upper: None,
        });
    }
    let bp = blueprint(req)?;
    let prep = instantiate(&bp, None)?;
    if prep.degenerate {
        // δ(ε) = 0 < δ already at ε = 0: no privacy cost at this target.
        let bound = if prep.eeai { Some(0.0) } else { None };
        return Ok(EpsilonPoint {
            delta,
            eps_lower: bound,
            eps_est: 0.0,
            eps_upper: bound,
        });
    }
    let hint = if bp.steps.len() == 1 {
        analytic_epsilon_ceiling(&bp.steps[0].spec, prep.m, delta)
    } else {
        None
    };
    let eps_est = smallest_root(
        |e| prep.est_clamped(e),
        delta,
        hint,
        "epsilon_at_delta (point-estimate curve)",
    )?;
    let (eps_lower, eps_upper) = if prep.eeai {
        let lo = smallest_root(
            |e| prep.lower_clamped(e),
            delta,
            hint,
            "epsilon_at_delta (lower envelope)",
        )?;
        let hi = largest_root(
            |e| prep.upper_clamped(e),
            delta,
            prep.upper_plateau(),
            "epsilon_at_delta (upper envelope)",
        )?;
        (Some(lo), Some(hi))
    } else {
        (None, None)
    };
    Ok(EpsilonPoint {
        delta,
        eps_lower,
        eps_est,
        eps_upper,
    })
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// Evaluate the request at its target, dispatching on the target kind.
pub fn evaluate(req: &AccountantRequest) -> Result<Evaluation> {
    match req.target {
        Target::Epsilon(_) => Ok(Evaluation::DeltaAt(delta_at_epsilon(req)?)),
        Target::Delta(_) => Ok(Evaluation::EpsilonAt(epsilon_at_delta(req)?)),
    }
}

/// Evaluate the request across composition lengths. The composition must
/// reduce to a single distinct spec (its count is replaced by each grid m);
/// per-step moments are computed once, so each additional point costs only
/// the O(1) rescale plus the mode's own arithmetic. Per-point failures are
/// reported in the output rather than aborting the sweep.
pub fn privacy_curve(req: &AccountantRequest, m_grid: &[u64]) -> Result<Vec<CurvePoint>> {
    if m_grid.is_empty() {
        return Err(Error::InvalidParameter("m_grid must be nonempty".into()));
    }
    if m_grid[0] == 0 {
        return Err(Error::InvalidParameter(
            "m_grid entries must be at least 1".into(),
        ));
    }
    if m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "m_grid must be strictly ascending".into(),
        ));
    }
    let comp = canonical(&req.composition);
    if comp.len() != 1 {
        return Err(Error::UnsupportedConfiguration(format!(
            "privacy_curve sweeps the repetition count of a single mechanism; \
             the composition has {} distinct specs",
            comp.len()
        )));
    }
    if req.mode == Mode::Oracle {
        // No per-m work can be shared: each length is its own convolution.
        let spec = comp[0].0;
        return Ok(m_grid
            .iter()
            .map(|&m| {
                let mut point_req = req.clone();
                point_req.composition = vec![(spec, m)];
                CurvePoint {
                    m,
                    result: evaluate(&point_req),
                }
            })
            .collect());
    }
    let bp = blueprint(req)?;
    let points = m_grid
        .iter()
        .map(|&m| {
            let result = instantiate(&bp, Some(m)).and_then(|prep| match req.target {
                Target::Epsilon(eps) => Ok(Evaluation::DeltaAt(delta_point(&prep, eps))),
                Target::Delta(delta) => {
                    curve_epsilon_point(&bp, &prep, delta).map(Evaluation::EpsilonAt)
                }
            });
            CurvePoint { m, result }
        })
        .collect();
    Ok(points)
}

/// ε(δ) for one curve point, reusing the already-instantiated evaluators.
fn curve_epsilon_point(bp: &Blueprint, prep: &Prepared, delta: f64) -> Result<EpsilonPoint> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "inversion needs delta in (0, 1), got {delta}"
        )));
    }
    if prep.degenerate {
        let bound = if prep.eeai { Some(0.0) } else { None };
        return Ok(EpsilonPoint {
            delta,
            eps_lower: bound,
            eps_est: 0.0,
            eps_upper: bound,
        });
    }
    let hint = analytic_epsilon_ceiling(&bp.steps[0].spec, prep.m, delta);
    let eps_est = smallest_root(
        |e| prep.est_clamped(e),
        delta,
        hint,
        "privacy_curve (point-estimate curve)",
    )?;
    let (eps_lower, eps_upper) = if prep.eeai {
        let lo = smallest_root(
            |e| prep.lower_clamped(e),
            delta,
            hint,
            "privacy_curve (lower envelope)",
        )?;
        let hi = largest_root(
            |e| prep.upper_clamped(e),
            delta,
            prep.upper_plateau(),
            "privacy_curve (upper envelope)",
        )?;
        (Some(lo), Some(hi))
    } else {
        (None, None)
    };
    Ok(EpsilonPoint {
        delta,
        eps_lower,
        eps_est,
        eps_upper,
    })
}
