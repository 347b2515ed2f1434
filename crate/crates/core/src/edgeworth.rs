//! Edgeworth CDF approximations of the standardized m-fold PLLR sum,
//! orders 0 through 3.
//!
//! Order 0 is the plain normal limit (the CLT approximation used by
//! Gaussian-DP accounting). Higher orders add the classical Hermite
//! correction terms driven by the standardized sum cumulants
//!
//!   κ₃ = λ₃/√m,  κ₄ = λ₄/m,  κ₅ = λ₅/m^{3/2},
//!
//! giving (with He_n the probabilists' Hermite polynomials)
//!
//!   E(x) = Φ(x) − φ(x) · [ κ₃/6·He₂(x)                          (order ≥ 1)
//!                        + κ₄/24·He₃(x) + κ₃²/72·He₅(x)          (order ≥ 2)
//!                        + κ₅/120·He₄(x) + κ₃κ₄/144·He₆(x)
//!                          + κ₃³/1296·He₈(x) ]                   (order ≥ 3)
//!
//! This is the standard CDF-level series (see e.g. Hall, *The Bootstrap and
//! Edgeworth Expansion*, ch. 2). Values are the **raw** series: they are not
//! clamped to [0, 1] and are not forced monotone — the bounds and accountant
//! layers need the uncorrected values, and clamping happens exactly once at
//! the accountant's output boundary.

use crate::error::{Error, Result};
use crate::mechanisms::CompositionStats;
use crate::special::{
    hermite2, hermite3, hermite4, hermite5, hermite6, hermite8, norm_cdf, phi,
};

/// Highest implemented expansion order.
pub const MAX_ORDER: usize = 3;

/// An Edgeworth CDF approximation for one composition's PLLR sum.
#[derive(Clone, Copy, Debug)]
pub struct EdgeworthSeries {
    order: usize,
    stats: CompositionStats,
    /// Standardized sum cumulants κ₃, κ₄, κ₅.
    kappa3: f64,
    kappa4: f64,
    kappa5: f64,
}

impl EdgeworthSeries {
    pub fn new(order: usize, stats: CompositionStats) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "Edgeworth order must be 0..={MAX_ORDER}, got {order}"
            )));
        }
        let m = stats.m as f64;
        Ok(EdgeworthSeries {
            order,
            stats,
            kappa3: stats.lambda3 / m.sqrt(),
            kappa4: stats.lambda4 / m,
            kappa5: stats.lambda5 / (m * m.sqrt()),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stats(&self) -> &CompositionStats {
        &self.stats
    }

    /// The series for the standardized sum, E(x). Raw value; may leave [0,1]
    /// in the far tails for strongly skewed compositions.
    pub fn cdf_standardized(&self, x: f64) -> f64 {
        let base = norm_cdf(x);
        if self.order == 0 {
            return base;
        }
        let mut correction = self.kappa3 / 6.0 * hermite2(x);
        if self.order >= 2 {
            correction += self.kappa4 / 24.0 * hermite3(x)
                + self.kappa3 * self.kappa3 / 72.0 * hermite5(x);
        }
        if self.order >= 3 {
            correction += self.kappa5 / 120.0 * hermite4(x)
                + self.kappa3 * self.kappa4 / 144.0 * hermite6(x)
                + self.kappa3.powi(3) / 1296.0 * hermite8(x);
        }
        base - phi(x) * correction
    }

    /// The series on the original sum scale, G(x) = E((x − Mₘ)/Bₘ).
    ///
    /// A degenerate composition (Bₘ = 0) is an exact point mass at Mₘ, so
    /// the CDF is the step function 1{x ≥ Mₘ}.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.stats.degenerate || self.stats.b == 0.0 {
            return if x >= self.stats.big_m { 1.0 } else { 0.0 };
        }
        self.cdf_standardized((x - self.stats.big_m) / self.stats.b)
    }
}
