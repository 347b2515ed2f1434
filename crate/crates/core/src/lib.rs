//! Numerical accountant for differential privacy based on Edgeworth
//! expansions of privacy-loss log-likelihood ratios (PLLRs).
//!
//! For an m-fold composition of subsampled Gaussian / Laplace mechanisms the
//! privacy profile δ(ε) is an expectation over sums of i.i.d.-style PLLR
//! terms. This crate computes:
//!
//! * **AEA** — an Edgeworth-series point estimate of δ(ε) (orders 0–3, where
//!   order 0 is the plain CLT/Gaussian-DP approximation),
//! * **EEAI** — a rigorous finite-sample interval [δ⁻(ε), δ⁺(ε)] wrapping the
//!   order-1 estimate with explicit Berry–Esseen-style error bounds,
//! * an FFT-convolution **oracle** for desk-scale ground truth and Monte
//!   Carlo validation.
//!
//! Module map: [`mechanisms`] turns mechanism parameters into per-step PLLR
//! moment profiles; [`edgeworth`] evaluates the expansion CDFs; [`bounds`]
//! computes the finite-sample error terms; [`accountant`] assembles
//! estimates and intervals and inverts ε(δ); [`oracle`] provides the ground
//! truth used in tests and in `--mode oracle`.

pub mod accountant;
pub mod bounds;
pub mod edgeworth;
pub mod error;
pub mod mechanisms;
pub mod oracle;
pub mod quad;
pub mod root;
pub mod special;

pub use error::{Error, Result};
