//! Spectral prediction of memoryless nonlinear distortion driven by Gaussian
//! multi-carrier signals.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`nonlinearity`]: a measured (or analytic) voltage transfer function is
//!    extended to a `2c`-periodic odd function and expanded as a Fourier series
//!    `p(x) = Σ F_λ exp(jλπx/c)`.
//! 2. [`chf`]: under a jointly Gaussian input the output autocorrelation is a
//!    power series in the input correlation coefficient,
//!    `Ψ(τ) = Σ_k t_k ρ(τ)^k`, with term powers `t_k = |h_k|² σ^(2k) / k!`.
//! 3. [`spectrum`]: the spectrum of `ρ^k` is the k-fold autoconvolution of the
//!    normalised input spectrum, so the output spectrum is the `t_k`-weighted
//!    sum of autoconvolutions. The `k = 1` term is the signal; everything else
//!    is distortion.
//!
//! [`ingest`] reads instrument CSV exports and converts units, and [`oracle`]
//! is an independent Monte-Carlo check of the whole chain.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chf;
pub mod error;
pub mod ingest;
pub mod nonlinearity;
pub mod oracle;
pub mod spectrum;

pub use chf::{compute_sdr, compute_weights, WeightOptions, WeightSeries};
pub use error::{Error, Result};
pub use ingest::{SpectrumTrace, VnaSweepRecord};
pub use nonlinearity::{AnalyticModel, DeviceFunction, FourierCoefficients, PeriodicExtension, TransferCurve};
pub use num_complex::Complex64;
pub use spectrum::{ComponentSpectra, ConvMode, Spectrum, SpectrumUnit};
