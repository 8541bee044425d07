//! Weight series of the Gaussian characteristic-function expansion.
//!
//! For a jointly Gaussian input of RMS `σ` plus bias `β`, the output
//! autocorrelation of the periodic nonlinearity is
//!
//! ```text
//! Ψ(τ) = Σ_k t_k ρ(τ)^k,    t_k = |h_k|² σ^(2k) / k!
//! h_k  = j^k Σ_λ F_λ · e^{jλπβ/c} · e^{-π²σ²λ²/(2c²)} · (λπ/c)^k
//! ```
//!
//! `t_1` is the signal power and the remaining orders are distortion.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::dbm_to_rms_volts;
use crate::nonlinearity::{hard_limiter_coefficients, FourierCoefficients};

/// Hard cap on automatically selected truncation orders.
pub const K_CAP: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    /// Explicit truncation order; `None` selects the smallest odd order that
    /// meets `k_tail_tolerance`, capped at [`K_CAP`].
    pub k_max: Option<usize>,
    pub k_tail_tolerance: f64,
    /// Allowed contribution of the outermost harmonic pair relative to the rest.
    pub n_tail_tolerance: f64,
    pub strict: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { k_max: None, k_tail_tolerance: 1e-10, n_tail_tolerance: 1e-5, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    /// Per order: outermost-λ contribution relative to the remaining partial sum.
    pub n_tail_ratio: Vec<f64>,
    pub worst_n_tail_ratio: f64,
    /// `t_K / Σ_{k<=K} t_k`.
    pub k_tail_ratio: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSeries {
    pub sigma: f64,
    pub beta: f64,
    pub c: f64,
    pub k_max: usize,
    /// `h_k` for `k = 0..=k_max`.
    pub h: Vec<Complex64>,
    /// `t_k = |h_k|² σ^(2k) / k!` for `k = 0..=k_max`.
    pub term_powers: Vec<f64>,
    pub n_used: usize,
    pub diagnostics: ConvergenceDiagnostics,
}

impl WeightSeries {
    pub fn signal_power(&self) -> f64 {
        self.term_powers.get(1).copied().unwrap_or(0.0)
    }

    pub fn dc_power(&self) -> f64 {
        self.term_powers[0]
    }

    /// Sum of `t_k` for `k >= 2`, plus `t_0` when `include_dc`.
    pub fn distortion_power(&self, include_dc: bool) -> f64 {
        let ac: f64 = self.term_powers.iter().skip(2).sum();
        if include_dc {
            ac + self.term_powers[0]
        } else {
            ac
        }
    }

    pub fn total_power(&self) -> f64 {
        self.term_powers.iter().sum()
    }

    /// Copy truncated to a lower order.
    pub fn truncated(&self, k_max: usize) -> Self {
        let k = k_max.min(self.k_max);
        let mut out = self.clone();
        out.k_max = k;
        out.h.truncate(k + 1);
        out.term_powers.truncate(k + 1);
        out.diagnostics.n_tail_ratio.truncate(k + 1);
        out.diagnostics.k_tail_ratio = k_tail_ratio(&out.term_powers);
        out
    }

    pub fn to_file(&self) -> WeightsFile {
        WeightsFile {
            sigma: self.sigma,
            beta: self.beta,
            c: self.c,
            k_max: self.k_max,
            n_used: self.n_used,
            h: self.h.iter().map(|v| [v.re, v.im]).collect(),
            term_powers: self.term_powers.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// Weights file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub sigma: f64,
    pub beta: f64,
    pub c: f64,
    pub k_max: usize,
    pub n_used: usize,
    pub h: Vec<[f64; 2]>,
    pub term_powers: Vec<f64>,
    pub diagnostics: ConvergenceDiagnostics,
}

fn k_tail_ratio(t: &[f64]) -> f64 {
    let total: f64 = t.iter().sum();
    match t.last() {
        Some(&last) if total > 0.0 => last / total,
        _ => 0.0,
    }
}

/// Neumaier-compensated sum of `terms` in descending-magnitude order.
fn compensated_sum(terms: &mut [(f64, Complex64)]) -> Complex64 {
    terms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut acc = [(0.0f64, 0.0f64); 2];
    for (_, t) in terms.iter() {
        for (slot, x) in acc.iter_mut().zip([t.re, t.im]) {
            let (sum, comp) = *slot;
            let next = sum + x;
            let comp = if sum.abs() >= x.abs() { comp + ((sum - next) + x) } else { comp + ((x - next) + sum) };
            *slot = (next, comp);
        }
    }
    Complex64::new(acc[0].0 + acc[0].1, acc[1].0 + acc[1].1)
}

fn ln_factorials(k_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

struct Harmonic {
    lambda: i64,
    /// `ln|F_λ| − π²σ²λ²/(2c²)`.
    log_base: f64,
    /// `ln(|λ|π/c)`.
    log_freq: f64,
    /// `F_λ/|F_λ| · e^{jλπβ/c}`.
    phasor: Complex64,
}

/// Scaled weight `g_k = h_k σ^k / √(k!)` (so that `t_k = |g_k|²`) plus the
/// outer-ring ratio for that order.
fn scaled_weight(harmonics: &[Harmonic], k: usize, ln_sigma: f64, ln_kfact: f64, outer: i64) -> (Complex64, f64) {
    let kf = k as f64;
    let scale = kf * ln_sigma - 0.5 * ln_kfact;
    let mut terms: Vec<(f64, Complex64)> = Vec::with_capacity(harmonics.len());
    let mut ring = Complex64::new(0.0, 0.0);
    for hm in harmonics {
        if hm.lambda == 0 && k > 0 {
            continue;
        }
        let log_mag = hm.log_base + if k > 0 { kf * hm.log_freq } else { 0.0 } + scale;
        if log_mag < -745.0 {
            continue;
        }
        let mag = log_mag.exp();
        let sign = if hm.lambda < 0 && k % 2 == 1 { -1.0 } else { 1.0 };
        let term = hm.phasor * (sign * mag);
        if hm.lambda.abs() == outer {
            ring += term;
        }
        terms.push((mag, term));
    }
    let sum = compensated_sum(&mut terms);
    let j_k = match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let rest = (sum - ring).norm();
    let ratio = if ring.norm() == 0.0 {
        0.0
    } else if rest > 0.0 {
        ring.norm() / rest
    } else {
        f64::INFINITY
    };
    (j_k * sum, ratio)
}

/// Computes `h_k` and `t_k` by direct summation over the harmonics.
pub fn compute_weights(
    coeffs: &FourierCoefficients,
    sigma: f64,
    beta: f64,
    opts: &WeightOptions,
) -> Result<WeightSeries> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if !beta.is_finite() {
        return Err(Error::Domain(format!("bias must be finite, got {beta}")));
    }
    if opts.k_max == Some(0) {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    let c = coeffs.c;
    let a = PI * PI * sigma * sigma / (2.0 * c * c);
    let harmonics: Vec<Harmonic> = coeffs
        .iter()
        .filter(|(_, f)| f.norm() > 0.0)
        .map(|(lambda, f)| {
            let lf = lambda as f64;
            Harmonic {
                lambda,
                log_base: f.norm().ln() - a * lf * lf,
                log_freq: if lambda == 0 { 0.0 } else { (lf.abs() * PI / c).ln() },
                phasor: Complex64::from_polar(1.0, f.arg() + lf * PI * beta / c),
            }
        })
        .collect();
    let outer = coeffs.half_len() as i64;
    let k_compute = opts.k_max.unwrap_or(K_CAP);
    let ln_fact = ln_factorials(k_compute);
    let ln_sigma = sigma.ln();

    let per_order: Vec<(Complex64, f64)> =
        (0..=k_compute).into_par_iter().map(|k| scaled_weight(&harmonics, k, ln_sigma, ln_fact[k], outer)).collect();
    let mut term_powers: Vec<f64> = per_order.iter().map(|(g, _)| g.norm_sqr()).collect();
    let mut h: Vec<Complex64> =
        per_order.iter().enumerate().map(|(k, (g, _))| g * (0.5 * ln_fact[k] - k as f64 * ln_sigma).exp()).collect();
    let mut n_tail: Vec<f64> = per_order.iter().map(|(_, r)| *r).collect();

    let mut warnings = Vec::new();
    let k_max = match opts.k_max {
        Some(k) => k,
        None => {
            let mut cumulative = term_powers[0];
            let mut chosen = None;
            for k in 1..=k_compute {
                cumulative += term_powers[k];
                // An order is only accepted once the preceding (even) order is negligible too.
                let tail = if k >= 2 { term_powers[k].max(term_powers[k - 1]) } else { term_powers[k] };
                if k % 2 == 1 && cumulative > 0.0 && tail / cumulative < opts.k_tail_tolerance {
                    chosen = Some(k);
                    break;
                }
            }
            chosen.unwrap_or_else(|| {
                warnings.push(format!(
                    "order series did not reach tail tolerance {:e}; truncated at K = {K_CAP}",
                    opts.k_tail_tolerance
                ));
                K_CAP
            })
        }
    };
    term_powers.truncate(k_max + 1);
    h.truncate(k_max + 1);
    n_tail.truncate(k_max + 1);

    // Ratios only mean something for orders that carry power.
    let total: f64 = term_powers.iter().sum();
    for (ratio, t) in n_tail.iter_mut().zip(&term_powers) {
        if total <= 0.0 || *t / total <= 1e-12 {
            *ratio = 0.0;
        }
    }
    let worst = n_tail.iter().copied().fold(0.0, f64::max);
    if worst > opts.n_tail_tolerance {
        let msg = format!(
            "outermost harmonic contributes {worst:e} of the partial sum (tolerance {:e}); increase N",
            opts.n_tail_tolerance
        );
        if opts.strict {
            return Err(Error::Convergence(msg));
        }
        warnings.push(msg);
    }
    Ok(WeightSeries {
        sigma,
        beta,
        c,
        k_max,
        n_used: coeffs.n,
        diagnostics: ConvergenceDiagnostics {
            worst_n_tail_ratio: worst,
            k_tail_ratio: k_tail_ratio(&term_powers),
            n_tail_ratio: n_tail,
            warnings,
        },
        h,
        term_powers,
    })
}

/// Signal-to-distortion ratio in dB: `t_1` against every other order
/// (DC only with `include_dc`). `+inf` when there is no distortion.
pub fn compute_sdr(weights: &WeightSeries, include_dc: bool) -> Result<f64> {
    let signal = weights.signal_power();
    if !(signal > 0.0) {
        return Err(Error::Degenerate("first-order term carries no power".into()));
    }
    let distortion = weights.distortion_power(include_dc);
    if distortion == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * signal.log10() - 10.0 * distortion.log10())
}

/// Coefficients of `(2/π)·arcsin ρ` as a power series in `ρ`, index = order.
pub fn price_series_coefficients(k_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    // a_m = (2m)! / (4^m (m!)²)
    let mut a = 1.0;
    for m in 0.. {
        let k = 2 * m + 1;
        if k > k_max {
            break;
        }
        if m > 0 {
            a *= (2 * m - 1) as f64 / (2 * m) as f64;
        }
        out[k] = 2.0 / PI * a / k as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub k: usize,
    pub term_power: f64,
    pub arcsine: f64,
    /// Relative error for odd orders, absolute residual for even orders.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceComparison {
    pub n: usize,
    pub k_max: usize,
    pub rows: Vec<PriceRow>,
    pub max_odd_rel_error: f64,
    pub max_even_residual: f64,
}

impl PriceComparison {
    pub fn passes(&self, odd_tol: f64, even_tol: f64) -> bool {
        self.max_odd_rel_error < odd_tol && self.max_even_residual < even_tol
    }
}

pub const PRICE_SIGMA: f64 = 0.1;

/// Runs the analytic hard limiter (`c = 1`, `β = 0`, `σ = 0.1`) through the
/// weight series and compares with the arcsine-law coefficients.
pub fn validate_price(n: usize, k_max: usize) -> Result<PriceComparison> {
    let coeffs = hard_limiter_coefficients(n, 1.0)?;
    let opts = WeightOptions { k_max: Some(k_max.max(1)), ..WeightOptions::default() };
    let weights = compute_weights(&coeffs, PRICE_SIGMA, 0.0, &opts)?;
    let reference = price_series_coefficients(weights.k_max);
    let mut max_odd: f64 = 0.0;
    let mut max_even: f64 = 0.0;
    let rows = (1..=weights.k_max)
        .map(|k| {
            let t = weights.term_powers[k];
            let r = reference[k];
            let error = if k % 2 == 1 {
                let e = ((t - r) / r).abs();
                max_odd = max_odd.max(e);
                e
            } else {
                max_even = max_even.max(t.abs());
                t.abs()
            };
            PriceRow { k, term_power: t, arcsine: r, error }
        })
        .collect();
    Ok(PriceComparison { n, k_max: weights.k_max, rows, max_odd_rel_error: max_odd, max_even_residual: max_even })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveRange {
    pub start_dbm: f64,
    pub stop_dbm: f64,
    pub step_db: f64,
}

impl DriveRange {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_db > 0.0) || !self.start_dbm.is_finite() || !self.stop_dbm.is_finite() {
            return Err(Error::Domain(format!("sweep step must be positive, got {}", self.step_db)));
        }
        if self.stop_dbm < self.start_dbm {
            return Err(Error::Domain(format!("empty sweep range {} .. {} dBm", self.start_dbm, self.stop_dbm)));
        }
        let count = ((self.stop_dbm - self.start_dbm) / self.step_db + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start_dbm + i as f64 * self.step_db).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_in_dbm: f64,
    pub sigma_v: f64,
    pub sdr_db: Option<f64>,
    /// Output powers in watts into the reference resistance.
    pub p_signal: Option<f64>,
    pub p_distortion: Option<f64>,
    pub error: Option<String>,
}

/// SDR and output powers across input drive levels.
pub fn sdr_sweep(
    coeffs: &FourierCoefficients,
    range: &DriveRange,
    beta: f64,
    r_ohm: f64,
    opts: &WeightOptions,
    include_dc: bool,
) -> Result<Vec<SweepRow>> {
    let points = range.points()?;
    Ok(points
        .par_iter()
        .map(|&p| {
            let sigma = dbm_to_rms_volts(p, r_ohm);
            let result = compute_weights(coeffs, sigma, beta, opts)
                .and_then(|w| compute_sdr(&w, include_dc).map(|sdr| (w, sdr)));
            match result {
                Ok((w, sdr)) => SweepRow {
                    p_in_dbm: p,
                    sigma_v: sigma,
                    sdr_db: Some(sdr),
                    p_signal: Some(w.signal_power() / r_ohm),
                    p_distortion: Some(w.distortion_power(include_dc) / r_ohm),
                    error: None,
                },
                Err(e) => SweepRow {
                    p_in_dbm: p,
                    sigma_v: sigma,
                    sdr_db: None,
                    p_signal: None,
                    p_distortion: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
