//! Finite-sample error bounds for the order-1 Edgeworth CDF approximation,
//! and exponential tail bounds on the PLLR sums themselves.
//!
//! Three bound families:
//!
//! * [`uniform_bound_order1`] — a Berry–Esseen-style sup-norm bound
//!   Δ_{m,1} ≥ sup_x |F(x) − G₁(x)| valid for any independent composition
//!   with finite fourth moments. Leading terms are O(1/√m) with explicit
//!   constants; the remainder [`remainder_r1`] is O(m^{-5/4}).
//! * [`iid_refined_bound`] — an O(1/m) bound available for i.i.d.
//!   compositions with absolutely continuous steps; needs the modulus of the
//!   standardized sum's characteristic function (supplied by the oracle).
//! * [`gaussian_tail_bound`] / [`laplace_tail_bound`] — adaptive bounds
//!   on the upper tail P(Σᵢ Tᵢ ≥ ε) that decay exponentially in ε and m,
//!   used to sharpen the interval accountant at large ε where a fixed
//!   sup-norm bound is vacuous.
//!
//! Everything here is closed-form arithmetic plus one-dimensional adaptive
//! quadrature; the only caller-tunable knob is `smoothing_eps`, an internal
//! parameter of the remainder's smoothing inequality that must lie in
//! (0, 1/3) and defaults to [`DEFAULT_SMOOTHING_EPS`].

use crate::error::{Error, Result};
use crate::mechanisms::{
    pllr_moments, CompositionStats, MechanismKind, MechanismSpec, PllrBranch, Variable,
};
use crate::quad;
use crate::root;
use crate::special::{norm_cdf, norm_sf, phi, upper_gamma_3_2};

/// Coefficient of the smoothing-kernel bound |Ψ(t)| ≤ 1.0253/(2π|t|).
pub const PSI_COEF: f64 = 1.0253;
/// Constant χ₁ of the characteristic-function bound
/// exp(−t²/2 + χ₁|t|³K̃₃/√m + t²√K₄/(2√m)).
pub const CHI1: f64 = 0.099162;
/// Scaled location t₁* of the first positive root of the kernel equation
/// that fixes the split point aₘ = 2t₁*π√m/K̃₃ between the central and
/// oscillatory integration regimes.
pub const T1_STAR: f64 = 0.635967;
/// Default smoothing parameter for the remainder terms.
pub const DEFAULT_SMOOTHING_EPS: f64 = 0.1;

/// Inputs shared by the uniform and refined bounds.
#[derive(Clone, Copy, Debug)]
pub struct UniformBoundInputs {
    pub stats: CompositionStats,
    /// Smoothing parameter ε of R₁(t, ε); must lie in (0, 1/3).
    pub smoothing_eps: f64,
}

impl UniformBoundInputs {
    pub fn new(stats: CompositionStats, smoothing_eps: f64) -> Result<Self> {
        if !(smoothing_eps > 0.0 && smoothing_eps < 1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing_eps must lie in (0, 1/3), got {smoothing_eps}"
            )));
        }
        Ok(UniformBoundInputs {
            stats,
            smoothing_eps,
        })
    }

    pub fn with_default_smoothing(stats: CompositionStats) -> Self {
        UniformBoundInputs {
            stats,
            smoothing_eps: DEFAULT_SMOOTHING_EPS,
        }
    }
}

// ---------------------------------------------------------------------------
// Uniform order-1 bound
// ---------------------------------------------------------------------------

/// Leading terms of the uniform bound:
/// 0.1995·K̃₃/√m + (0.031·K̃₃² + 0.195·K₄ + 0.054·|λ₃|·K̃₃ + 0.038·λ₃²)/m.
pub fn uniform_bound_leading(stats: &CompositionStats) -> f64 {
    let m = stats.m as f64;
    let k3t = stats.k3_tilde;
    let l3 = stats.lambda3;
    0.1995 * k3t / m.sqrt()
        + (0.031 * k3t * k3t + 0.195 * stats.k4_abs + 0.054 * l3.abs() * k3t + 0.038 * l3 * l3)
            / m
}

/// The complete uniform bound Δ_{m,1} = leading terms + r₁.
pub fn uniform_bound_order1(inputs: &UniformBoundInputs) -> Result<f64> {
    Ok(uniform_bound_leading(&inputs.stats) + remainder_r1(inputs)?)
}

/// Itemized remainder r₁ (all summands are nonnegative by construction).
#[derive(Clone, Copy, Debug)]
pub struct R1Parts {
    /// (14.1961 + 67.0415)·K̃₃⁴/(16π⁴m²).
    pub closed_form: f64,
    /// |λ₃|·exp(−2m²/K̃₃⁴)/(3π√m).
    pub exp_term: f64,
    /// Oscillatory-regime integral with the characteristic-function bound.
    pub i32_term: f64,
    /// Oscillatory-regime integral of the plain Gaussian kernel.
    pub i33_term: f64,
    /// Central-regime smoothing integral ∫₀^ℓ u·e^{−u²/2}·R₁(u, ε) du.
    pub smoothing_integral: f64,
}

impl R1Parts {
    pub fn total(&self) -> f64 {
        self.closed_form + self.exp_term + self.i32_term + self.i33_term + self.smoothing_integral
    }

    pub fn summands(&self) -> [f64; 5] {
        [
            self.closed_form,
            self.exp_term,
            self.i32_term,
            self.i33_term,
            self.smoothing_integral,
        ]
    }
}

/// The remainder r₁ of the uniform bound, O(m^{-5/4}).
pub fn remainder_r1(inputs: &UniformBoundInputs) -> Result<f64> {
    Ok(remainder_r1_parts(inputs)?.total())
}

/// The remainder with its five summands exposed for diagnostics.
pub fn remainder_r1_parts(inputs: &UniformBoundInputs) -> Result<R1Parts> {
    let stats = &inputs.stats;
    let eps = inputs.smoothing_eps;
    check_smoothing(eps)?;
    let m = stats.m as f64;
    let k3t = stats.k3_tilde;
    let pi = std::f64::consts::PI;

    let closed_form = (14.1961 + 67.0415) * k3t.powi(4) / (16.0 * pi.powi(4) * m * m);
    let exp_term =
        stats.lambda3.abs() * (-2.0 * m * m / k3t.powi(4)).exp() / (3.0 * pi * m.sqrt());

    // Regime split: ℓ = √(2ε)·(m/K₄)^{1/4} below, aₘ = 2t₁*π√m/K̃₃ above.
    let lo = (2.0 * eps).sqrt() * (m / stats.k4_abs).powf(0.25);
    let a_m = 2.0 * T1_STAR * pi * m.sqrt() / k3t;

    let i32_term = if lo < a_m {
        let coeff = PSI_COEF * stats.k3_abs / (6.0 * pi * m.sqrt());
        let v = quad::integrate(
            |u| u * u * cf_bound_exponent(u, stats).exp(),
            lo,
            a_m,
            1e-14,
            1e-9,
        )
        .map_err(|e| named_term_error("I_{3,2}", e))?;
        coeff * v.value
    } else {
        0.0
    };
    let i33_term = if lo < a_m {
        let coeff = PSI_COEF * stats.lambda3.abs() / (6.0 * pi * m.sqrt());
        // ∫ u²e^{−u²/2} du in closed form via Γ(3/2, ·).
        coeff
            * std::f64::consts::SQRT_2
            * (upper_gamma_3_2(0.5 * lo * lo) - upper_gamma_3_2(0.5 * a_m * a_m)).max(0.0)
    } else {
        0.0
    };

    let smoothing_integral = smoothing_tail_integral(stats, eps, lo)?;

    Ok(R1Parts {
        closed_form,
        exp_term,
        i32_term,
        i33_term,
        smoothing_integral,
    })
}

fn check_smoothing(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 / 3.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "smoothing_eps must lie in (0, 1/3), got {eps}"
        )))
    }
}

fn named_term_error(term: &str, e: Error) -> Error {
    Error::numeric("bound remainder", format!("{term} failed: {e}"))
}

/// Exponent of the characteristic-function upper bound for the standardized
/// sum: −u²/2 + χ₁·u³·K̃₃/√m + u²·√K₄/(2√m).
fn cf_bound_exponent(u: f64, stats: &CompositionStats) -> f64 {
    let m = (stats.m as f64).sqrt();
    let u2 = u * u;
    -0.5 * u2 + CHI1 * u2 * u.abs() * stats.k3_tilde / m + u2 * stats.k4_abs.sqrt() / (2.0 * m)
}

/// The smoothing-error factor R₁(t, ε) of the central regime.
fn smoothing_r1(t: f64, stats: &CompositionStats, eps: f64) -> f64 {
    let m = stats.m as f64;
    let k4 = stats.k4_abs;
    let l3 = stats.lambda3.abs();
    let ind = if stats.nonzero_third { 1.0 } else { 0.0 };
    let p1 = (144.0
        + 48.0 * eps
        + 4.0 * eps * eps
        + ind
            * (96.0 * (2.0 * eps).sqrt()
                + 32.0 * eps
                + 16.0 * std::f64::consts::SQRT_2 * eps.powf(1.5)))
        / 576.0;
    let one_m3e = 1.0 - 3.0 * eps;
    let denom = 2.0 * one_m3e * one_m3e;
    let e1 = (eps * eps * (1.0 / 6.0 + 2.0 * p1 / (one_m3e * one_m3e))).exp();
    let c = 1.0 / 24.0 + p1 / denom;
    let ta = t.abs();
    let r = k4 / m;
    let u11 = ta.powi(6) / 24.0 * r.powf(1.5) + ta.powi(8) / 576.0 * r * r;
    let u12 = ind
        * (ta.powi(5) / 6.0 * r.powf(1.25)
            + ta.powi(6) / 36.0 * r.powf(1.5)
            + ta.powi(7) / 72.0 * r.powf(1.75));
    (u11 + u12) / denom
        + e1 * (ta.powi(8) * k4 * k4 / (2.0 * m * m) * c * c
            + ta.powi(7) * l3 * k4 / (6.0 * m.powf(1.5)) * c)
}

/// (1.0253/π)·∫₀^ℓ u·e^{−u²/2}·R₁(u, ε) du.
fn smoothing_tail_integral(stats: &CompositionStats, eps: f64, lo: f64) -> Result<f64> {
    if lo <= 0.0 {
        return Ok(0.0);
    }
    let v = quad::integrate(
        |u| u * (-0.5 * u * u).exp() * smoothing_r1(u, stats, eps),
        0.0,
        lo,
        1e-16,
        1e-9,
    )
    .map_err(|e| named_term_error("smoothing integral", e))?;
    Ok(PSI_COEF / std::f64::consts::PI * v.value)
}

// ---------------------------------------------------------------------------
// i.i.d. refined bound
// ---------------------------------------------------------------------------

/// Itemized refined bound.
#[derive(Clone, Copy, Debug)]
pub struct RefinedBoundParts {
    /// (0.195·K₄ + 0.038·λ₃²)/m.
    pub leading: f64,
    /// (1.0253/π)·∫_{aₘ}^{bₘ} |f_{Sₘ}(t)|/t dt over the numerically computed
    /// characteristic-function modulus.
    pub cf_integral: f64,
    /// Everything else (r₂).
    pub r2: f64,
    /// Integration endpoints, for diagnostics.
    pub a_m: f64,
    pub b_m: f64,
}

impl RefinedBoundParts {
    pub fn total(&self) -> f64 {
        self.leading + self.cf_integral + self.r2
    }
}

/// The O(1/m) refined bound for i.i.d. compositions with absolutely
/// continuous step distributions. `cf_modulus` must evaluate |f_{Sₘ}(t)|,
/// the characteristic-function modulus of the standardized m-fold sum.
pub fn iid_refined_bound<F: Fn(f64) -> f64>(
    inputs: &UniformBoundInputs,
    cf_modulus: F,
) -> Result<f64> {
    Ok(iid_refined_bound_parts(inputs, cf_modulus)?.total())
}

pub fn iid_refined_bound_parts<F: Fn(f64) -> f64>(
    inputs: &UniformBoundInputs,
    cf_modulus: F,
) -> Result<RefinedBoundParts> {
    let stats = &inputs.stats;
    let eps = inputs.smoothing_eps;
    check_smoothing(eps)?;
    let m = stats.m as f64;
    let pi = std::f64::consts::PI;
    let k3t = stats.k3_tilde;
    let l3 = stats.lambda3.abs();

    let leading = (0.195 * stats.k4_abs + 0.038 * stats.lambda3 * stats.lambda3) / m;

    let a_m = 2.0 * T1_STAR * pi * m.sqrt() / k3t;
    let big_t = 16.0 * pi.powi(4) * m * m / k3t.powi(4);
    let b_m = big_t;

    let cf_integral = if a_m < b_m {
        PSI_COEF / pi
            * integrate_decaying(
                |u| cf_modulus(u) / u,
                a_m,
                b_m,
            )
            .map_err(|e| named_term_error("cf integral", e))?
    } else {
        0.0
    };

    // --- r₂ ---
    let mut r2 = 1.2533 * k3t.powi(4) / (16.0 * pi.powi(4) * m * m)
        + 0.3334 * l3 * k3t.powi(4) / (16.0 * pi.powi(4) * m.powf(2.5))
        + 14.1961 * k3t.powi(16) / (16.0f64.powi(4) * pi.powi(16) * m.powi(8))
        + l3 * (-128.0 * pi.powi(6) * m.powi(4) / k3t.powi(8)).exp() / (3.0 * pi * m.sqrt());

    let lo = (2.0 * eps).sqrt() * (m / stats.k4_abs).powf(0.25);
    let q14 = big_t.powf(0.25) / pi; // T^{1/4}/π

    // I₅,₂: plain-kernel integral from ℓ to T^{1/4}/π in closed form.
    if lo < q14 {
        r2 += PSI_COEF * l3 / (3.0 * pi * std::f64::consts::SQRT_2 * m.sqrt())
            * (upper_gamma_3_2(eps * (m / stats.k4_abs).sqrt())
                - upper_gamma_3_2(big_t.sqrt() / (2.0 * pi * pi)))
            .max(0.0);
    }

    // I₅,₃: characteristic-function-bound integral from ℓ to T^{1/4}/π.
    if lo < q14 {
        let v = quad::integrate(
            |u| u * u * cf_bound_exponent(u, stats).exp(),
            lo,
            q14,
            1e-14,
            1e-9,
        )
        .map_err(|e| named_term_error("I_{5,3}", e))?;
        r2 += PSI_COEF * stats.k3_abs / (6.0 * pi * m.sqrt()) * v.value;
    }

    // I₅,₄: plain-kernel closed form from T^{1/4} scale up to T scale.
    if big_t.powf(0.25) < big_t {
        r2 += PSI_COEF * l3 / (3.0 * pi * std::f64::consts::SQRT_2 * m.sqrt())
            * (upper_gamma_3_2(big_t.sqrt() / (2.0 * pi * pi))
                - upper_gamma_3_2(big_t * big_t / (2.0 * pi * pi)))
            .max(0.0);
    }

    // J₃: exact |f_{Sₘ}| over the handover window [T^{1/4}/π, t₁*·T^{1/4}].
    let j3_hi = T1_STAR * big_t.powf(0.25);
    if q14 < j3_hi {
        let v = integrate_decaying(|u| cf_modulus(u) / u, q14, j3_hi)
            .map_err(|e| named_term_error("J_3", e))?;
        r2 += PSI_COEF / pi * v;
    }

    // J₅: Gaussian-kernel tail over [T^{1/4}/π, T/π]; the integrand
    // underflows past u ≈ 40, so the effective upper limit is capped.
    let j5_hi = (big_t / pi).min(q14 + 60.0);
    if q14 < j5_hi {
        let v = quad::integrate(|u| (-0.5 * u * u).exp() / u, q14, j5_hi, 1e-18, 1e-9)
            .map_err(|e| named_term_error("J_5", e))?;
        r2 += PSI_COEF / pi * v.value;
    }

    // Central-regime smoothing integral (same form as in r₁).
    r2 += smoothing_tail_integral(stats, eps, lo)?;

    Ok(RefinedBoundParts {
        leading,
        cf_integral,
        r2,
        a_m,
        b_m,
    })
}

/// Integrate a nonnegative, eventually negligible integrand over [a, b]
/// (b possibly enormous) by dyadic panels, stopping once a panel stops
/// contributing relative to the running total.
fn integrate_decaying<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut left = a;
    while left < b {
        let right = (2.0 * left).min(b);
        let piece = quad::integrate(&f, left, right, 1e-18, 1e-9)?;
        total += piece.value;
        if piece.value.abs() < 1e-18 * total.abs().max(1e-30) && right < b {
            break;
        }
        left = right;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Adaptive exponential tail bounds
// ---------------------------------------------------------------------------

/// Parameters of the Gaussian-mechanism tail bound at a truncation point a.
#[derive(Clone, Copy, Debug)]
pub struct TailBoundParams {
    /// Truncation point of the PLLR linearization.
    pub a: f64,
    /// a⁺ = φ(a)/(1 − Φ(a)) (> a for a > 0).
    pub a_plus: f64,
    /// η(a): negated mean of the truncated-step surrogate; the bound decays
    /// only when η > 0.
    pub eta: f64,
    /// Sub-Gaussian proxy variance τ².
    pub tau_sq: f64,
}

/// Mills-ratio point a⁺ = φ(a)/(1 − Φ(a)).
pub fn mills_a_plus(a: f64) -> f64 {
    phi(a) / norm_sf(a)
}

/// The gap Δ(ξ) = log(p + (1−p)·e^{−(μξ−μ²/2)}) between the subsampled PLLR
/// and its linear Gaussian part; strictly decreasing in ξ.
fn pllr_gap(mu: f64, p: f64, xi: f64) -> f64 {
    let w = mu * xi - 0.5 * mu * mu;
    (p * w.exp_m1()).ln_1p() - w
}

/// e(a) = ∫ₐ^∞ (Δ(a) − Δ(ξ))·φ(ξ) dξ; nonnegative, strictly decreasing.
fn truncation_excess(mu: f64, p: f64, a: f64) -> Result<f64> {
    let gap_a = pllr_gap(mu, p, a);
    let v = quad::integrate(
        |xi| (gap_a - pllr_gap(mu, p, xi)) * phi(xi),
        a,
        a + 40.0,
        1e-14,
        1e-10,
    )?;
    Ok(v.value)
}

/// Build the tail-bound parameters at a *given* truncation point `a`.
/// η(a) is fixed by the construction to −½·E[X] of the step PLLR, which is
/// valid (the bound holds) precisely when the defining balance
/// e(a) ≥ −½·E[X] holds; the selection rule in [`gaussian_tail_params`]
/// picks the `a` where it holds with equality.
pub fn gaussian_tail_params_at(spec: &MechanismSpec, a: f64) -> Result<TailBoundParams> {
    if spec.kind == MechanismKind::SubsampledLaplace {
        return Err(Error::UnsupportedConfiguration(
            "gaussian tail bound requires a Gaussian-family mechanism".into(),
        ));
    }
    let mu = spec.mu;
    let p = spec.p;
    let a_plus = mills_a_plus(a);
    let x_mean = pllr_moments(spec, PllrBranch::Primary, Variable::X)?.mean;
    let eta = -0.5 * x_mean;
    // τ² = max of the three printed sub-Gaussian proxies. The third term's
    // denominator is −2·log(Φ(a⁺) − Φ(a)), positive since the band mass is
    // below 1.
    let t1 = {
        let s = (p * (mu * a - 0.5 * mu * mu).exp_m1()).ln_1p() + mu * (a_plus - a)
            - (1.0 - p).ln();
        0.25 * s * s
    };
    let t2 = mu * mu;
    let band = norm_cdf(a_plus) - norm_cdf(a);
    let t3 = if band > 0.0 && band < 1.0 {
        (a_plus - a).powi(2) * mu * mu / (-2.0 * band.ln())
    } else {
        0.0
    };
    Ok(TailBoundParams {
        a,
        a_plus,
        eta,
        tau_sq: t1.max(t2).max(t3),
    })
}

/// Selection rule for the truncation point: solve e(a) = −½·E[X] by
/// bisection on a ∈ [0, 20] (the smallest root if several). Returns None —
/// bound unavailable — when e(0) < −½·E[X], i.e. no admissible a exists.
pub fn gaussian_tail_params(spec: &MechanismSpec) -> Result<Option<TailBoundParams>> {
    if spec.kind == MechanismKind::SubsampledLaplace {
        return Err(Error::UnsupportedConfiguration(
            "gaussian tail bound requires a Gaussian-family mechanism".into(),
        ));
    }
    if spec.is_degenerate() {
        return Ok(None);
    }
    let mu = spec.mu;
    let p = spec.p;
    let x_mean = pllr_moments(spec, PllrBranch::Primary, Variable::X)?.mean;
    let target = -0.5 * x_mean;
    if target <= 0.0 {
        return Ok(None);
    }
    let f = |a: f64| truncation_excess(mu, p, a).unwrap_or(f64::NAN) - target;
    let f0 = f(0.0);
    if !f0.is_finite() || f0 < 0.0 {
        return Ok(None);
    }
    // e(a) → 0 as a grows, so f is eventually negative; 20 is far past any
    // realistic crossing (e(20) < 1e-80).
    let a = root::find_root(f, 0.0, 20.0, 1e-12)?;
    let params = gaussian_tail_params_at(spec, a)?;
    if params.eta > 0.0 {
        Ok(Some(params))
    } else {
        Ok(None)
    }
}

/// Tail bound P(Σᵢ Xᵢ ≥ ε) ≤ 2·exp(−(ε + mη)²/(8mτ²)) for the primary-branch
/// X sum of a subsampled Gaussian mechanism, at truncation point `a`.
///
/// The raw exponential is returned (it may exceed 1; probabilities cap it).
pub fn gaussian_tail_bound(spec: &MechanismSpec, m: u64, epsilon: f64, a: f64) -> Result<f64> {
    let params = gaussian_tail_params_at(spec, a)?;
    if params.eta <= 0.0 {
        return Err(Error::UnsupportedConfiguration(
            "tail bound needs eta > 0; no admissible truncation here".into(),
        ));
    }
    Ok(gaussian_tail_bound_with(&params, m, epsilon))
}

/// Same bound, with precomputed parameters.
pub fn gaussian_tail_bound_with(params: &TailBoundParams, m: u64, epsilon: f64) -> f64 {
    let mf = m as f64;
    let s = epsilon + mf * params.eta;
    if s <= 0.0 {
        // Exponent would grow the bound past its trivial value.
        return 2.0;
    }
    2.0 * (-(s * s) / (8.0 * mf * params.tau_sq)).exp()
}

/// Precomputed drift and width parameters of the Laplace tail bound.
#[derive(Clone, Copy, Debug)]
pub struct LaplaceTailParams {
    /// η = −max{E[X⁽¹⁾], E[X⁽²⁾]} (> 0 whenever the bound is available).
    pub eta: f64,
    /// τ²: squared full support width of the single-step PLLR.
    pub tau_sq: f64,
}

/// Parameters of [`laplace_tail_bound`]; `None` when η ≤ 0 (bound
/// unavailable).
pub fn laplace_tail_params(spec: &MechanismSpec) -> Result<Option<LaplaceTailParams>> {
    if spec.kind != MechanismKind::SubsampledLaplace {
        return Err(Error::UnsupportedConfiguration(
            "laplace tail bound requires a SubsampledLaplace mechanism".into(),
        ));
    }
    if spec.is_degenerate() {
        return Err(Error::UnsupportedConfiguration(
            "PLLRs are identically zero (point mass): the tail is the step 1{eps <= 0}, \
             no exponential bound applies"
                .into(),
        ));
    }
    let mu = spec.mu;
    let p = spec.p;
    let ex1 = pllr_moments(spec, PllrBranch::Primary, Variable::X)?.mean;
    let ex2 = pllr_moments(spec, PllrBranch::Inverse, Variable::X)?.mean;
    let eta = -ex1.max(ex2);
    if eta <= 0.0 {
        return Ok(None);
    }
    let tau = (p * mu.exp_m1()).ln_1p() - (p * (-mu).exp_m1()).ln_1p();
    Ok(Some(LaplaceTailParams {
        eta,
        tau_sq: tau * tau,
    }))
}

/// The Laplace bound with precomputed parameters.
pub fn laplace_tail_bound_with(params: &LaplaceTailParams, m: u64, epsilon: f64) -> f64 {
    let mf = m as f64;
    let s = epsilon + mf * params.eta;
    if s <= 0.0 {
        return 1.0;
    }
    (-2.0 * s * s / (mf * params.tau_sq)).exp()
}

/// Tail bound exp(−2(ε + mη)²/(mτ²)) on max over both PLLR branches of
/// P(Σᵢ Tᵢ ≥ ε) for a subsampled Laplace mechanism, where
/// η = −max{E[X⁽¹⁾], E[X⁽²⁾]} and τ is the full PLLR support width.
pub fn laplace_tail_bound(spec: &MechanismSpec, m: u64, epsilon: f64) -> Result<Option<f64>> {
    Ok(laplace_tail_params(spec)?.map(|p| laplace_tail_bound_with(&p, m, epsilon)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Synthetic stats with chosen standardized aggregates (m, K̃₃, K₄, λ₃).
    fn synthetic(m: u64, k3_tilde: f64, k4_abs: f64, lambda3: f64) -> CompositionStats {
        CompositionStats {
            m,
            big_m: 0.0,
            b: (m as f64).sqrt(),
            b_bar: 1.0,
            lambda3,
            lambda4: 0.0,
            lambda5: 0.0,
            k3_abs: k3_tilde * 0.6,
            k4_abs,
            k3_tilde,
            nonzero_third: lambda3 != 0.0,
            degenerate: false,
        }
    }

    #[test]
    fn leading_terms_match_hand_arithmetic() {
        // K̃₃ = 1, K₄ = 1, λ₃ = 0, m = 10⁴:
        // 0.1995/100 + (0.031 + 0.195)/10⁴ = 0.0020176.
        let stats = synthetic(10_000, 1.0, 1.0, 0.0);
        assert_abs_diff_eq!(uniform_bound_leading(&stats), 2.0176e-3, epsilon = 1e-12);
    }

    #[test]
    fn zero_skew_drops_lambda_terms_exactly() {
        let with = synthetic(100, 2.0, 3.0, 0.5);
        let without = synthetic(100, 2.0, 3.0, 0.0);
        let diff = uniform_bound_leading(&with) - uniform_bound_leading(&without);
        let expected = (0.054 * 0.5 * 2.0 + 0.038 * 0.25) / 100.0;
        assert_abs_diff_eq!(diff, expected, epsilon = 1e-15);
    }

    #[test]
    fn r1_summands_are_nonnegative() {
        for &(m, k3t, k4, l3) in &[
            (100u64, 5.0, 30.0, 2.0),
            (10_000, 8.0, 160.0, 7.0),
            (1_000_000, 1.5, 2.0, 0.0),
        ] {
            let inputs =
                UniformBoundInputs::with_default_smoothing(synthetic(m, k3t, k4, l3));
            let parts = remainder_r1_parts(&inputs).unwrap();
            for s in parts.summands() {
                assert!(s >= 0.0, "negative summand {s} for m={m}");
            }
        }
    }

    #[test]
    fn smoothing_eps_domain_enforced() {
        let stats = synthetic(100, 1.0, 1.0, 0.0);
        assert!(UniformBoundInputs::new(stats, 0.0).is_err());
        assert!(UniformBoundInputs::new(stats, 1.0 / 3.0).is_err());
        assert!(UniformBoundInputs::new(stats, 0.2).is_ok());
    }

    #[test]
    fn printed_constants_used_verbatim() {
        assert_eq!(CHI1, 0.099162);
        assert_eq!(T1_STAR, 0.635967);
        assert_eq!(PSI_COEF, 1.0253);
    }

    #[test]
    fn incomplete_gamma_closed_forms() {
        // Γ(3/2, 0) = √π/2 normalizes the I₅ terms.
        assert_abs_diff_eq!(
            upper_gamma_3_2(0.0),
            0.5 * std::f64::consts::PI.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn mills_point_at_zero() {
        assert_abs_diff_eq!(
            mills_a_plus(0.0),
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(mills_a_plus(0.0), 0.7978845608, epsilon = 1e-9);
        // a⁺ > a for positive a.
        for &a in &[0.5, 1.0, 2.0, 4.0] {
            assert!(mills_a_plus(a) > a);
        }
    }

    #[test]
    fn gaussian_tail_bound_decreases_in_epsilon() {
        let spec = MechanismSpec::subsampled_gaussian(1.0, 0.05).unwrap();
        let params = gaussian_tail_params(&spec).unwrap().expect("root exists");
        assert!(params.eta > 0.0);
        assert!(params.a_plus > params.a);
        let mut last = f64::INFINITY;
        for i in 0..60 {
            let eps = 1.0 + 10.0 * i as f64;
            let b = gaussian_tail_bound_with(&params, 1000, eps);
            assert!(b <= last + 1e-18);
            last = b;
        }
        // → 0 for large ε.
        assert!(gaussian_tail_bound_with(&params, 1000, 1e4) < 1e-10);
    }

    #[test]
    fn laplace_tail_bound_degenerate_reported() {
        let spec = MechanismSpec::subsampled_laplace(0.0, 0.1).unwrap();
        assert!(laplace_tail_bound(&spec, 10, 1.0).is_err());
    }

    #[test]
    fn laplace_tail_bound_at_zero_exponent_is_one() {
        let spec = MechanismSpec::subsampled_laplace(1.0, 0.1).unwrap();
        // At ε = −mη the exponent vanishes: bound = 1 before clamping.
        let ex1 = pllr_moments(&spec, PllrBranch::Primary, Variable::X)
            .unwrap()
            .mean;
        let ex2 = pllr_moments(&spec, PllrBranch::Inverse, Variable::X)
            .unwrap()
            .mean;
        let eta = -ex1.max(ex2);
        let m = 500u64;
        let b = laplace_tail_bound(&spec, m, -(m as f64) * eta).unwrap().unwrap();
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wrong_mechanism_kind_rejected() {
        let gauss = MechanismSpec::subsampled_gaussian(1.0, 0.1).unwrap();
        assert!(laplace_tail_bound(&gauss, 10, 1.0).is_err());
        let lap = MechanismSpec::subsampled_laplace(1.0, 0.1).unwrap();
        assert!(gaussian_tail_params(&lap).is_err());
    }
}
