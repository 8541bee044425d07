//! Monte-Carlo cross-check of the predicted spectrum.
//!
//! A Gaussian sequence with the target spectrum is synthesised by random
//! spectral amplitudes on one circular grid, pushed sample-wise through the
//! same [`DeviceFunction`] the coefficients were fitted from, and its PSD is
//! estimated by Welch averaging. The sequence is sampled at `L·Δf`, so the
//! prediction it is compared with uses circular autoconvolutions (distortion
//! aliases exactly as it does in the sampled signal).

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::chf::{compute_sdr, compute_weights, WeightOptions, K_CAP};
use crate::error::{Error, Result};
use crate::nonlinearity::{DeviceFunction, FourierCoefficients};
use crate::spectrum::{
    integrate_power, normalize_to_unit_area, predict_output_spectrum, Band, ConvMode, Spectrum, SpectrumUnit,
};

/// Truncation order used when the automatic order runs into [`K_CAP`].
pub const ORACLE_K_MAX: usize = 999;

/// Bins below this level relative to the spectrum peak are not compared.
pub const COMPARE_FLOOR_DB: f64 = -60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaturationPolicy {
    /// Any sample beyond `±c` is an error.
    Strict,
    /// Samples beyond `±c` are clamped and counted.
    #[default]
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub n_segments: usize,
    pub target: Spectrum,
    pub sigma: f64,
    pub beta: f64,
    pub saturation: SaturationPolicy,
}

impl OracleConfig {
    pub fn new(target: &Spectrum, sigma: f64) -> Result<Self> {
        let cfg = Self {
            seed: 0,
            n_samples: 4096,
            n_segments: 64,
            target: prepare_target(target)?,
            sigma,
            beta: 0.0,
            saturation: SaturationPolicy::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_samples.is_power_of_two() || self.n_samples < 256 {
            return Err(Error::Domain(format!("n_samples must be a power of two >= 256, got {}", self.n_samples)));
        }
        if self.n_segments < 8 {
            return Err(Error::Domain(format!("n_segments must be at least 8, got {}", self.n_segments)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Domain(format!("bias must be finite, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.n_samples * self.n_segments
    }

    /// Sample rate implied by the target grid.
    pub fn sample_rate(&self) -> f64 {
        self.target.len() as f64 * self.target.f_step_hz
    }

    pub fn centre_hz(&self) -> f64 {
        self.target.frequency(self.target.centre_bin())
    }
}

/// Unit-area target made even about the centre bin, as a real signal requires.
pub fn prepare_target(target: &Spectrum) -> Result<Spectrum> {
    let l = target.len();
    let c = target.centre_bin();
    let sym: Vec<f64> = (0..l).map(|i| 0.5 * (target.values[i] + target.values[(2 * c + l - i) % l])).collect();
    normalize_to_unit_area(&Spectrum::new(target.f_start_hz, target.f_step_hz, sym, target.unit)?)
}

fn normal_pairs(seed: u64, stream: u64, count: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count).map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

/// Circularly stationary Gaussian sequence of `n_samples · n_segments`
/// samples with the target spectrum and variance `σ²` (zero mean).
pub fn synthesize_gaussian_signal(cfg: &OracleConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let t = cfg.total_samples();
    let l = cfg.target.len() as i64;
    let c0 = cfg.target.centre_bin() as i64;
    // Fine bin j sits at offset j·fs/T; the target is held constant across each of its bins.
    let ratio = l as f64 / t as f64;
    let density = |j: usize| {
        let offset = if j <= t / 2 { j as f64 } else { j as f64 - t as f64 };
        let bin = ((offset * ratio).round() as i64 + c0).rem_euclid(l);
        cfg.target.values[bin as usize]
    };
    let weights: Vec<f64> = (0..t).map(density).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("target spectrum has no power on the synthesis grid".into()));
    }

    let half = t / 2;
    let chunk = (half + 1).div_ceil(cfg.n_segments);
    let draws: Vec<(f64, f64)> = (0..cfg.n_segments)
        .into_par_iter()
        .map(|s| {
            let lo = (s * chunk).min(half + 1);
            let hi = ((s + 1) * chunk).min(half + 1);
            normal_pairs(cfg.seed, s as u64, hi - lo)
        })
        .flatten()
        .collect();

    let tf = t as f64;
    let mut bins = vec![Complex64::new(0.0, 0.0); t];
    for (j, &(g1, g2)) in draws.iter().enumerate() {
        let v = cfg.sigma * cfg.sigma * weights[j] / total * tf * tf;
        if j == 0 || j == half {
            bins[j] = Complex64::new(v.sqrt() * g1, 0.0);
        } else {
            let x = Complex64::new(g1, g2) * (0.5 * v).sqrt();
            bins[j] = x;
            bins[t - j] = x.conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(t).process(&mut bins);
    Ok(bins.iter().map(|z| z.re / tf).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearOutput {
    pub samples: Vec<f64>,
    pub clamped: usize,
}

/// `y = p(x + β)` sample by sample through the device's own evaluation path.
pub fn apply_memoryless_nonlinearity(
    x: &[f64],
    beta: f64,
    device: &DeviceFunction,
    policy: SaturationPolicy,
) -> Result<NonlinearOutput> {
    if !device.is_real() {
        return Err(Error::Unsupported(
            "the time-domain oracle supports zero-phase devices only; AM-PM conversion is unsupported".into(),
        ));
    }
    let c = device.c();
    let mut clamped = 0usize;
    let mut samples = Vec::with_capacity(x.len());
    for &v in x {
        let mut u = v + beta;
        if u.abs() > c {
            if policy == SaturationPolicy::Strict {
                return Err(Error::Domain(format!("sample {u} V exceeds the extension interval ±{c} V")));
            }
            clamped += 1;
            u = u.clamp(-c, c);
        }
        samples.push(device.eval_unchecked(u).re);
    }
    Ok(NonlinearOutput { samples, clamped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Two-sided density in V²/Hz on the estimator's own grid.
    pub spectrum: Spectrum,
    /// Variance of the per-window periodograms divided by the window count.
    pub variance: Vec<f64>,
    pub segments: usize,
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

fn periodogram(y: &[f64], window: &[f64], fft: &Arc<dyn Fft<f64>>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = y.iter().zip(window).map(|(a, w)| Complex64::new(a * w, 0.0)).collect();
    fft.process(&mut buf);
    buf.iter().map(|z| z.norm_sqr()).collect()
}

/// Welch estimate: Hann windows of `n_samples`, 50% overlap.
pub fn estimate_psd(y: &[f64], cfg: &OracleConfig) -> Result<PsdEstimate> {
    cfg.validate()?;
    if y.len() != cfg.total_samples() {
        return Err(Error::GridMismatch(format!("expected {} samples, got {}", cfg.total_samples(), y.len())));
    }
    let n = cfg.n_samples;
    let hop = n / 2;
    let windows = (y.len() - n) / hop + 1;
    let win = hann(n);
    let fs = cfg.sample_rate();
    let norm = 1.0 / (fs * win.iter().map(|w| w * w).sum::<f64>());
    let fft = FftPlanner::new().plan_fft_forward(n);
    let grams: Vec<Vec<f64>> =
        (0..windows).into_par_iter().map(|w| periodogram(&y[w * hop..w * hop + n], &win, &fft)).collect();

    let mut mean = vec![0.0; n];
    for g in &grams {
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v;
        }
    }
    let count = windows as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; n];
    for g in &grams {
        for ((s, v), m) in var.iter_mut().zip(g).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    // Reorder FFT bins to ascending frequency around the target centre.
    let shift = |v: &[f64], scale: f64| -> Vec<f64> { (0..n).map(|i| v[(i + n / 2) % n] * scale).collect() };
    let denom = if windows > 1 { count * (count - 1.0) } else { 1.0 };
    let step = fs / n as f64;
    let spectrum =
        Spectrum::new(cfg.centre_hz() - (n / 2) as f64 * step, step, shift(&mean, norm), SpectrumUnit::PowerDensity)?;
    Ok(PsdEstimate { spectrum, variance: shift(&var, norm * norm / denom), segments: windows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumComparison {
    pub band: Band,
    pub compared_bins: usize,
    pub max_abs_delta_db: f64,
    pub mean_delta_db: f64,
    /// Per compared bin: frequency, predicted and measured density.
    pub bins: Vec<(f64, f64, f64)>,
}

/// Estimate resampled onto the prediction grid: bin averages when the
/// estimate is at least twice as fine, linear interpolation otherwise.
pub fn resample(measured: &Spectrum, grid: &Spectrum) -> Vec<Option<f64>> {
    let step = measured.f_step_hz;
    let start = measured.f_start_hz;
    let last = measured.len() - 1;
    let coarse = grid.f_step_hz;
    (0..grid.len())
        .map(|i| {
            let f = grid.frequency(i);
            if coarse >= 2.0 * step {
                let (lo, hi) = (f - 0.5 * coarse, f + 0.5 * coarse);
                let mut acc = 0.0;
                let mut width = 0.0;
                let first = (((lo - start) / step).floor().max(0.0)) as usize;
                for j in first..=last {
                    let (a, b) = (measured.frequency(j) - 0.5 * step, measured.frequency(j) + 0.5 * step);
                    if a >= hi {
                        break;
                    }
                    let overlap = b.min(hi) - a.max(lo);
                    if overlap > 0.0 {
                        acc += overlap * measured.values[j];
                        width += overlap;
                    }
                }
                (width >= 0.5 * coarse).then(|| acc / width)
            } else {
                let pos = (f - start) / step;
                if pos < 0.0 || pos > last as f64 {
                    return None;
                }
                let k = (pos.floor() as usize).min(last.saturating_sub(1));
                let frac = pos - k as f64;
                Some(measured.values[k] * (1.0 - frac) + measured.values[(k + 1).min(last)] * frac)
            }
        })
        .collect()
}

/// Per-bin dB differences (prediction minus estimate) inside `band`, over
/// bins where both sides are within 60 dB of their peaks.
pub fn compare_spectra(predicted: &Spectrum, measured: &PsdEstimate, band: Band) -> Result<SpectrumComparison> {
    let resampled = resample(&measured.spectrum, predicted);
    let peak_p = predicted.values.iter().copied().fold(0.0, f64::max);
    let peak_m = resampled.iter().flatten().copied().fold(0.0, f64::max);
    let floor = 10f64.powf(COMPARE_FLOOR_DB / 10.0);
    let mut bins = Vec::new();
    for (i, m) in resampled.iter().enumerate() {
        let f = predicted.frequency(i);
        let (Some(m), true) = (m, f >= band.lo_hz && f <= band.hi_hz) else {
            continue;
        };
        let p = predicted.values[i];
        if p > floor * peak_p && *m > floor * peak_m {
            bins.push((f, p, *m));
        }
    }
    if bins.is_empty() {
        return Err(Error::GridMismatch("no overlapping bins above the comparison floor".into()));
    }
    let deltas: Vec<f64> = bins.iter().map(|(_, p, m)| 10.0 * (p / m).log10()).collect();
    Ok(SpectrumComparison {
        band,
        compared_bins: bins.len(),
        max_abs_delta_db: deltas.iter().fold(0.0, |a, d| a.max(d.abs())),
        mean_delta_db: deltas.iter().sum::<f64>() / deltas.len() as f64,
        bins,
    })
}

/// Time-domain SDR from the linear-regression (Bussgang) split
/// `y = αx + d`; the output mean counts as distortion only with `include_dc`.
pub fn bussgang_sdr(x: &[f64], y: &[f64], include_dc: bool) -> Result<f64> {
    let n = x.len() as f64;
    let sxx: f64 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("input sequence has no power".into()));
    }
    let alpha = sxy / sxx;
    let mean_y = y.iter().sum::<f64>() / n;
    let residual: f64 = x.iter().zip(y).map(|(a, b)| (b - alpha * a).powi(2)).sum::<f64>() / n;
    let distortion = if include_dc { residual } else { residual - mean_y * mean_y };
    let signal = alpha * alpha * sxx;
    if !(signal > 0.0) {
        return Err(Error::Degenerate("output is uncorrelated with the input".into()));
    }
    if distortion <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / distortion).log10())
}

/// Band holding every target bin at or above 1% of the peak.
pub fn occupied_band(target: &Spectrum) -> Band {
    let peak = target.values.iter().copied().fold(0.0, f64::max);
    let first = target.values.iter().position(|v| *v >= 0.01 * peak).unwrap_or(0);
    let last = target.values.iter().rposition(|v| *v >= 0.01 * peak).unwrap_or(target.len() - 1);
    Band { lo_hz: target.frequency(first), hi_hz: target.frequency(last) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub n_samples: usize,
    pub n_segments: usize,
    pub sigma: f64,
    pub beta: f64,
    pub saturation: SaturationPolicy,
    pub device: String,
    pub k_max: usize,
    pub sdr_predicted_db: f64,
    pub sdr_oracle_db: f64,
    pub sdr_delta_db: f64,
    pub max_delta_db: f64,
    pub mean_delta_db: f64,
    pub compared_bins: usize,
    pub band: Band,
    pub input_variance: f64,
    pub output_power_predicted: f64,
    pub output_power_oracle: f64,
    pub clamped_samples: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub report: OracleReport,
    pub predicted: Spectrum,
    pub estimate: PsdEstimate,
    pub comparison: SpectrumComparison,
}

/// Synthesises, distorts and estimates, then compares with the prediction
/// from `coeffs` (which should describe `device`).
pub fn run_oracle(
    device: &DeviceFunction,
    coeffs: &FourierCoefficients,
    cfg: &OracleConfig,
    opts: &WeightOptions,
    band: Option<Band>,
) -> Result<OracleRun> {
    cfg.validate()?;
    let target = prepare_target(&cfg.target)?;
    let mut warnings = Vec::new();
    let mut weights = compute_weights(coeffs, cfg.sigma, cfg.beta, opts)?;
    if opts.k_max.is_none() && weights.k_max == K_CAP && weights.diagnostics.k_tail_ratio >= opts.k_tail_tolerance {
        warnings.push(format!("order series not converged at K = {K_CAP}; prediction uses K = {ORACLE_K_MAX}"));
        weights = compute_weights(coeffs, cfg.sigma, cfg.beta, &WeightOptions { k_max: Some(ORACLE_K_MAX), ..*opts })?;
    }
    warnings.extend(weights.diagnostics.warnings.iter().cloned());
    let cs = predict_output_spectrum(&weights, &target, ConvMode::Circular)?;
    let sdr_predicted = compute_sdr(&weights, false)?;

    let x = synthesize_gaussian_signal(&OracleConfig { target: target.clone(), ..cfg.clone() })?;
    let out = apply_memoryless_nonlinearity(&x, cfg.beta, device, cfg.saturation)?;
    if out.clamped > 0 {
        warnings.push(format!("{} samples clamped to ±{} V", out.clamped, device.c()));
    }
    let input_variance = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let sdr_oracle = bussgang_sdr(&x, &out.samples, false)?;
    let estimate = estimate_psd(&out.samples, cfg)?;
    let band = band.unwrap_or_else(|| occupied_band(&target));
    let comparison = compare_spectra(&cs.total, &estimate, band)?;
    let mean_y = out.samples.iter().sum::<f64>() / out.samples.len() as f64;
    let output_power_oracle =
        out.samples.iter().map(|v| v * v).sum::<f64>() / out.samples.len() as f64 - mean_y * mean_y;

    let report = OracleReport {
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        n_segments: cfg.n_segments,
        sigma: cfg.sigma,
        beta: cfg.beta,
        saturation: cfg.saturation,
        device: device.label().to_string(),
        k_max: weights.k_max,
        sdr_predicted_db: sdr_predicted,
        sdr_oracle_db: sdr_oracle,
        sdr_delta_db: sdr_predicted - sdr_oracle,
        max_delta_db: comparison.max_abs_delta_db,
        mean_delta_db: comparison.mean_delta_db,
        compared_bins: comparison.compared_bins,
        band,
        input_variance,
        output_power_predicted: integrate_power(&cs.total),
        output_power_oracle,
        clamped_samples: out.clamped,
        warnings,
    };
    Ok(OracleRun { report, predicted: cs.total, estimate, comparison })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{analytic_model_samples, fourier_coefficients_from_samples, AnalyticModel};

    fn flat(len: usize, width: usize) -> Spectrum {
        let c = len / 2;
        let values = (0..len).map(|i| if i.abs_diff(c) <= width / 2 { 1.0 } else { 0.0 }).collect();
        Spectrum::new(-(c as f64), 1.0, values, SpectrumUnit::LinearPower).unwrap()
    }

    fn small_cfg(target: &Spectrum, sigma: f64) -> OracleConfig {
        OracleConfig { n_samples: 1024, n_segments: 32, ..OracleConfig::new(target, sigma).unwrap() }
    }

    #[test]
    fn config_validation() {
        let t = flat(65, 9);
        let base = OracleConfig::new(&t, 1.0).unwrap();
        assert!(OracleConfig { n_samples: 1000, ..base.clone() }.validate().is_err());
        assert!(OracleConfig { n_samples: 128, ..base.clone() }.validate().is_err());
        assert!(OracleConfig { n_segments: 4, ..base.clone() }.validate().is_err());
        assert!(OracleConfig { sigma: 0.0, ..base }.validate().is_err());
    }

    #[test]
    fn synthesis_is_deterministic_with_right_power() {
        let cfg = OracleConfig::new(&flat(257, 33), 0.3).unwrap();
        let a = synthesize_gaussian_signal(&cfg).unwrap();
        let b = synthesize_gaussian_signal(&cfg).unwrap();
        assert_eq!(a, b);
        let var = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        assert!((var / 0.09 - 1.0).abs() < 0.02, "variance {var}");
        let other = synthesize_gaussian_signal(&OracleConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn white_target_is_uncorrelated() {
        let cfg = small_cfg(&Spectrum::new(0.0, 1.0, vec![1.0; 64], SpectrumUnit::LinearPower).unwrap(), 1.0);
        let x = synthesize_gaussian_signal(&cfg).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>();
        let lag1 = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
        assert!((lag1 / var).abs() < 0.05);
        let est = estimate_psd(&x, &cfg).unwrap();
        let mean = est.spectrum.values.iter().sum::<f64>() / est.spectrum.len() as f64;
        let expected = var / x.len() as f64 / cfg.sample_rate();
        assert!((mean / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn psd_integrates_to_variance() {
        let cfg = small_cfg(&flat(129, 17), 0.5);
        let x = synthesize_gaussian_signal(&cfg).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let est = estimate_psd(&x, &cfg).unwrap();
        assert!((integrate_power(&est.spectrum) / var - 1.0).abs() < 0.02);
        assert_eq!(est.segments, 63);
        assert!(est.variance.iter().all(|v| *v >= 0.0));
        assert!(estimate_psd(&x[1..], &cfg).is_err());
    }

    #[test]
    fn sinusoid_gives_one_dominant_bin() {
        let cfg = small_cfg(&flat(64, 1), 1.0);
        let n = cfg.total_samples();
        let fs = cfg.sample_rate();
        // 8 cycles per 1024-sample window: bin 8 above the centre.
        let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 8.0 * i as f64 / 1024.0).cos()).collect();
        let est = estimate_psd(&x, &cfg).unwrap();
        let s = &est.spectrum;
        let peak = (0..s.len()).max_by(|&a, &b| s.values[a].total_cmp(&s.values[b])).unwrap();
        let f = s.frequency(peak) - cfg.centre_hz();
        assert!((f.abs() - 8.0 * fs / 1024.0).abs() < 1e-9);
    }

    #[test]
    fn limiter_output_is_binary_and_linear_is_exact() {
        let x = vec![-0.3, -0.01, 0.02, 0.5];
        let sgn = DeviceFunction::analytic(AnalyticModel::Signum, 1.0).unwrap();
        let y = apply_memoryless_nonlinearity(&x, 0.0, &sgn, SaturationPolicy::Strict).unwrap();
        assert_eq!(y.samples, vec![-1.0, -1.0, 1.0, 1.0]);
        let lin = DeviceFunction::analytic(AnalyticModel::OddPolynomial { a1: 2.0, a3: 0.0, a5: 0.0 }, 1.0).unwrap();
        let y = apply_memoryless_nonlinearity(&x, 0.0, &lin, SaturationPolicy::Strict).unwrap();
        assert_eq!(y.samples, vec![-0.6, -0.02, 0.04, 1.0]);
    }

    #[test]
    fn saturation_policy() {
        let sgn = DeviceFunction::analytic(AnalyticModel::Signum, 1.0).unwrap();
        assert!(apply_memoryless_nonlinearity(&[2.0], 0.0, &sgn, SaturationPolicy::Strict).is_err());
        let y = apply_memoryless_nonlinearity(&[2.0, 0.1], 0.0, &sgn, SaturationPolicy::Clamp).unwrap();
        assert_eq!(y.clamped, 1);
    }

    #[test]
    fn tanh_compresses() {
        let cfg = small_cfg(&flat(129, 17), 1.0);
        let x = synthesize_gaussian_signal(&cfg).unwrap();
        let dev = DeviceFunction::analytic(AnalyticModel::ScaledTanh { gain: 1.0, v_sat: 1.0 }, 8.0).unwrap();
        let y = apply_memoryless_nonlinearity(&x, 0.0, &dev, SaturationPolicy::Clamp).unwrap();
        let vx = x.iter().map(|v| v * v).sum::<f64>();
        let vy = y.samples.iter().map(|v| v * v).sum::<f64>();
        assert!(vy < vx);
    }

    #[test]
    fn identical_spectra_compare_to_zero() {
        let s = normalize_to_unit_area(&flat(65, 9)).unwrap();
        let est = PsdEstimate { spectrum: s.clone(), variance: vec![0.0; 65], segments: 1 };
        let cmp = compare_spectra(&s, &est, Band { lo_hz: -10.0, hi_hz: 10.0 }).unwrap();
        assert_eq!(cmp.max_abs_delta_db, 0.0);
        assert_eq!(cmp.compared_bins, 9);
        let far = Spectrum { f_start_hz: 1e6, ..s.clone() };
        let est_far = PsdEstimate { spectrum: far, variance: vec![0.0; 65], segments: 1 };
        assert!(compare_spectra(&s, &est_far, Band { lo_hz: -10.0, hi_hz: 10.0 }).is_err());
    }

    #[test]
    fn bussgang_recovers_linear_gain() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64 - 50.0) / 50.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        assert_eq!(bussgang_sdr(&x, &y, false).unwrap(), f64::INFINITY);
    }

    #[test]
    fn soft_clipper_agrees_with_prediction() {
        let model = AnalyticModel::ScaledTanh { gain: 1.0, v_sat: 1.0 };
        let c = 4.0;
        let coeffs = fourier_coefficients_from_samples(&analytic_model_samples(model, c, 2001).unwrap());
        let dev = DeviceFunction::analytic(model, c).unwrap();
        let cfg = small_cfg(&flat(129, 17), 0.5);
        let run = run_oracle(&dev, &coeffs, &cfg, &WeightOptions::default(), None).unwrap();
        let r = &run.report;
        assert!(r.sdr_delta_db.abs() < 0.5, "{r:?}");
        assert!(r.max_delta_db < 1.0, "{r:?}");
        assert_eq!(run.report, run_oracle(&dev, &coeffs, &cfg, &WeightOptions::default(), None).unwrap().report);
    }
}
