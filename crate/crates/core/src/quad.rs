//! Adaptive Gauss–Kronrod quadrature (7-point Gauss / 15-point Kronrod).
//!
//! Plain globally-adaptive bisection: keep a worklist of segments, always
//! split the one with the largest error estimate, stop when the summed
//! estimate meets the tolerance. The error estimate per segment is the
//! difference between the embedded Gauss rule and the Kronrod rule, which
//! is conservative for smooth integrands.

use crate::error::{Error, Result};

// Nodes and weights of the 15-point Kronrod rule on [-1, 1] (positive half;
// the rule is symmetric). Standard QUADPACK constants, kept at published
// precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];
// Weights of the embedded 7-point Gauss rule (nodes are XGK[1], XGK[3], ...).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_33,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error (sum of per-segment Gauss/Kronrod gaps).
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let fsum = f(mid - x) + f(mid + x);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrate `f` over `[a, b]` to the requested absolute or relative
/// tolerance (whichever is satisfied first).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    integrate_split(f, &[a, b], abs_tol, rel_tol)
}

/// Integrate over `[points[0], points[last]]` with forced subdivision at the
/// interior points. Used to keep kinks (e.g. the Laplace PLLR's corners) on
/// segment boundaries where the rule converges fast again.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    const MAX_SEGMENTS: usize = 4096;
    if points.len() < 2 || points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "quadrature breakpoints must be strictly increasing".into(),
        ));
    }
    let mut segments: Vec<Segment> = Vec::with_capacity(64);
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        evaluations += 15;
        segments.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(QuadResult {
                value: total,
                abs_error: err,
                evaluations,
            });
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::numeric(
                "adaptive quadrature",
                format!(
                    "tolerance not reached after {} segments (error estimate {:.3e})",
                    segments.len(),
                    err
                ),
            ));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let Segment { a, b, .. } = segments[worst];
        let mid = 0.5 * (a + b);
        if !(a < mid && mid < b) {
            // Interval narrowed to machine precision; accept what we have.
            return Ok(QuadResult {
                value: total,
                abs_error: err,
                evaluations,
            });
        }
        let (v1, e1) = gk15(&f, a, mid);
        let (v2, e2) = gk15(&f, mid, b);
        evaluations += 30;
        segments[worst] = Segment {
            a,
            b: mid,
            value: v1,
            error: e1,
        };
        segments.push(Segment {
            a: mid,
            b,
            value: v2,
            error: e2,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        // Degree-7 polynomial: exact for the embedded Gauss rule already.
        let r = integrate(|x| 7.0 * x.powi(6) - 3.0 * x * x + 1.0, -1.0, 2.0, 1e-14, 1e-14)
            .unwrap();
        // Antiderivative x^7 - x^3 + x.
        assert_abs_diff_eq!(r.value, (128.0 - 8.0 + 2.0) - (-1.0 + 1.0 - 1.0), epsilon = 1e-11);
    }

    #[test]
    fn gaussian_mass_over_wide_interval() {
        let r = integrate(crate::special::phi, -12.0, 12.0, 1e-13, 1e-12).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kink_handled_via_breakpoint() {
        let r = integrate_split(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], 1e-14, 1e-14).unwrap();
        assert_abs_diff_eq!(r.value, 2.5, epsilon = 1e-13);
    }

    #[test]
    fn oscillatory_integrand_converges() {
        let r = integrate(|x: f64| (40.0 * x).sin() * (-x * x).exp(), 0.0, 6.0, 1e-12, 1e-10)
            .unwrap();
        assert!(r.abs_error < 1e-10);
        // Reference value from a much finer fixed subdivision.
        let mut reference = 0.0;
        for k in 0..6000 {
            let a = 6.0 * k as f64 / 6000.0;
            let b = 6.0 * (k + 1) as f64 / 6000.0;
            reference += gk15(&|x: f64| (40.0 * x).sin() * (-x * x).exp(), a, b).0;
        }
        assert_abs_diff_eq!(r.value, reference, epsilon = 1e-10);
    }

    #[test]
    fn bad_breakpoints_rejected() {
        assert!(integrate_split(|x| x, &[1.0, 0.0], 1e-6, 1e-6).is_err());
    }
}
