//! Bracketed scalar root finding: bisection with opportunistic secant steps.
//!
//! The accountant inverts monotone-decreasing δ(ε) curves whose derivatives
//! are not cheaply available, so a derivative-free hybrid is the right tool:
//! the secant step gives superlinear convergence on the smooth parts, and the
//! maintained bracket guarantees termination regardless.

use crate::error::{Error, Result};

/// Find `x` in `[a, b]` with `f(x) = 0`, assuming `f(a)` and `f(b)` have
/// opposite (or zero) signs. Converges to `tol` absolute accuracy in `x`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::numeric(
            "root finding",
            format!("no sign change on bracket [{lo}, {hi}]: f = ({flo:.3e}, {fhi:.3e})"),
        ));
    }
    // Which endpoint the previous iteration replaced: -1 for lo, 1 for hi,
    // 0 before the first step. When the same side moves twice in a row the
    // opposite endpoint is stale; the Illinois rule halves its stored value
    // so the secant stops stagnating against it (the privacy curves here
    // are convex enough that plain false position crawls one-sided). Only
    // the secant geometry sees the damped value — sign tests are unaffected.
    let mut last_moved = 0i8;
    // 200 iterations halve an f64 range down to denormals; the secant steps
    // only ever speed this up.
    for _ in 0..200 {
        let width = hi - lo;
        if width <= tol {
            break;
        }
        // Secant candidate from the bracket endpoints, used when it falls
        // comfortably inside the bracket; otherwise plain bisection.
        let mid = 0.5 * (lo + hi);
        let mut x = mid;
        let denom = fhi - flo;
        if denom != 0.0 {
            let s = hi - fhi * (hi - lo) / denom;
            let margin = 0.01 * (hi - lo);
            if s > lo + margin && s < hi - margin {
                x = s;
            }
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if !fx.is_finite() {
            return Err(Error::numeric(
                "root finding",
                format!("non-finite function value at x = {x}"),
            ));
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if last_moved == -1 {
                fhi *= 0.5;
            }
            last_moved = -1;
        } else {
            hi = x;
            fhi = fx;
            if last_moved == 1 {
                flo *= 0.5;
            }
            last_moved = 1;
        }
        // Safety net on top of the damping: if an iteration failed to shrink
        // the bracket geometrically, force one bisection step so worst-case
        // behaviour never drops below bisection speed.
        if hi - lo > 0.75 * width && hi - lo > 4.0 * tol {
            let m = 0.5 * (lo + hi);
            let fm = f(m);
            if fm == 0.0 {
                return Ok(m);
            }
            if fm.signum() == flo.signum() {
                lo = m;
                flo = fm;
                last_moved = -1;
            } else {
                hi = m;
                fhi = fm;
                last_moved = 1;
            }
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Widen `[lo, hi]` geometrically (doubling `hi - lo` each step) until
/// `f(hi)` changes sign relative to `f(lo)`, up to `hi_cap`. Returns the
/// widened bracket, or None if the cap is reached without a sign change.
pub fn widen_bracket<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    mut hi: f64,
    hi_cap: f64,
) -> Option<(f64, f64)> {
    let flo = f(lo);
    if flo == 0.0 {
        return Some((lo, lo));
    }
    let mut width = (hi - lo).max(1e-8);
    for _ in 0..200 {
        if hi > hi_cap {
            hi = hi_cap;
        }
        let fhi = f(hi);
        if fhi == 0.0 || fhi.signum() != flo.signum() {
            return Some((lo, hi));
        }
        if hi >= hi_cap {
            return None;
        }
        width *= 2.0;
        hi = lo + width;
    }
    None
}
