//! Binary classification from noise-corrupted samples by deconvolution-kernel
//! empirical risk minimization over Hölder boundary fragments.
//!
//! The observation model delivers two samples `Z = X + eps` with known noise
//! density. The classifier smooths candidate-set indicators with a
//! deconvolution kernel (base kernel divided by the noise characteristic
//! function in the Fourier domain), so the empirical risk is unbiased for a
//! base-kernel-smoothed population risk on the direct data. Minimization
//! over discretized boundary fragments is exact via dynamic programming.
//!
//! Modules
//! - [`densities`]: density and noise models, sampling, noise corruption.
//! - [`kernel`]: deconvolution-kernel construction and certificates.
//! - [`fragments`]: boundary fragments, pseudo-distances, Bayes set/risk,
//!   margin verification.
//! - [`risk`]: smoothed indicators, empirical and smoothed risks, bias.
//! - [`erm`]: per-bin cost decomposition and exact constrained DP.
//! - [`lowerbound`]: the hypothesis family behind the minimax lower bound,
//!   chi-square diagnostics, rate-exponent formulas.
//! - [`experiments`]: configuration, Monte-Carlo ladders, rate fitting.
//!
//! All numerics are generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the `*64` aliases below fix `f64`, which the CLI and
//! experiment harness use throughout.

pub mod densities;
pub mod erm;
pub mod error;
pub mod experiments;
pub mod fragments;
pub mod kernel;
pub mod lowerbound;
pub mod quad;
pub mod risk;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete `f64` aliases for the main domain types.
pub type DensityModel64 = densities::DensityModel<f64>;
pub type NoiseModel64 = densities::NoiseModel<f64>;
pub type Sample64 = densities::Sample<f64>;
pub type DeconvolutionKernel64 = kernel::DeconvolutionKernel<f64>;
pub type BoundaryFragment64 = fragments::BoundaryFragment<f64>;
pub type CandidateNetwork64 = erm::CandidateNetwork<f64>;
pub type HypothesisFamily64 = lowerbound::HypothesisFamily<f64>;
