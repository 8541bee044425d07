//! Frequency-domain synthesis of the output spectrum.
//!
//! The spectrum of `ρ(τ)^k` is the k-th autoconvolution of the normalised
//! input spectrum, so the output spectrum is `Σ_k t_k · (S ⊛ … ⊛ S)`.
//! Frequencies are offsets on the instrument's own grid: autoconvolutions are
//! centred on the grid's centre bin rather than moved to harmonic zones.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::chf::WeightSeries;
use crate::error::{Error, Result};
use crate::ingest::{dbm_to_watts, SpectrumTrace, TraceUnit};

/// Orders whose share of the total term power is below this are not synthesised.
pub const NEGLIGIBLE_ORDER: f64 = 1e-12;

/// Same-mode truncation loss above which a warning is attached.
pub const LOST_AREA_WARNING: f64 = 0.05;

/// Above this many multiply-adds a pairwise convolution goes through the FFT.
const DIRECT_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumUnit {
    /// Power per bin (W, or mV² when converted that way).
    LinearPower,
    /// Power per hertz (V²/Hz for weighted output components).
    PowerDensity,
    /// Density integrating to one over the grid.
    UnitAreaDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub f_start_hz: f64,
    pub f_step_hz: f64,
    pub values: Vec<f64>,
    pub unit: SpectrumUnit,
}

impl Spectrum {
    pub fn new(f_start_hz: f64, f_step_hz: f64, values: Vec<f64>, unit: SpectrumUnit) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty spectrum".into()));
        }
        if !(f_step_hz > 0.0) || !f_step_hz.is_finite() || !f_start_hz.is_finite() {
            return Err(Error::Domain(format!("invalid frequency grid step {f_step_hz}")));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("bin {bad} has invalid value {}", values[bad])));
        }
        Ok(Self { f_start_hz, f_step_hz, values, unit })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.f_start_hz + bin as f64 * self.f_step_hz
    }

    pub fn f_stop_hz(&self) -> f64 {
        self.frequency(self.len() - 1)
    }

    /// Index of the bin the autoconvolutions are centred on.
    pub fn centre_bin(&self) -> usize {
        self.len() / 2
    }

    pub fn area(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.f_step_hz
    }

    fn with_values(&self, values: Vec<f64>, unit: SpectrumUnit) -> Self {
        Self { f_start_hz: self.f_start_hz, f_step_hz: self.f_step_hz, values, unit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearScale {
    Watts,
    /// `v² = R · P`, reported in mV².
    MilliVoltsSquared {
        r_ohm: f64,
    },
}

/// Converts an instrument trace to linear units.
pub fn to_linear(trace: &SpectrumTrace, scale: LinearScale) -> Result<Spectrum> {
    let (values, unit) = match trace.unit {
        TraceUnit::DbmPerBin => {
            let factor = match scale {
                LinearScale::Watts => 1.0,
                LinearScale::MilliVoltsSquared { r_ohm } => r_ohm * 1e6,
            };
            (trace.values.iter().map(|&d| dbm_to_watts(d) * factor).collect(), SpectrumUnit::LinearPower)
        }
        TraceUnit::LinearPower => (trace.values.clone(), SpectrumUnit::LinearPower),
        TraceUnit::UnitAreaDensity => (trace.values.clone(), SpectrumUnit::UnitAreaDensity),
    };
    Spectrum::new(trace.f_start_hz, trace.f_step_hz, values, unit)
}

pub fn normalize_to_unit_area(s: &Spectrum) -> Result<Spectrum> {
    let sum: f64 = s.values.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Degenerate("spectrum has no power to normalise".into()));
    }
    let scale = 1.0 / (sum * s.f_step_hz);
    Ok(s.with_values(s.values.iter().map(|v| v * scale).collect(), SpectrumUnit::UnitAreaDensity))
}

/// Subtracts the median of the lowest decile of bins, clamping at zero.
pub fn floor_clip(s: &Spectrum) -> Spectrum {
    let mut sorted = s.values.clone();
    sorted.sort_by(f64::total_cmp);
    let decile = &sorted[..(sorted.len() / 10).max(1)];
    let floor = decile[decile.len() / 2];
    s.with_values(s.values.iter().map(|v| (v - floor).max(0.0)).collect(), s.unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    /// Every stage truncated to the input grid, centred on the centre bin.
    #[default]
    Same,
    /// Grid grows to `k(L−1)+1` bins; area is conserved exactly.
    Full,
    /// Wraps around the grid, i.e. the spectrum of a signal sampled at `L·Δf`.
    Circular,
}

impl FromStr for ConvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "same" => Ok(Self::Same),
            "full" => Ok(Self::Full),
            "circular" => Ok(Self::Circular),
            other => Err(Error::Domain(format!("unknown convolution mode `{other}` (same|full|circular)"))),
        }
    }
}

impl std::fmt::Display for ConvMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Same => "same",
            Self::Full => "full",
            Self::Circular => "circular",
        })
    }
}

fn nonzero_range(v: &[f64]) -> Option<(usize, usize)> {
    let first = v.iter().position(|x| *x != 0.0)?;
    let last = v.iter().rposition(|x| *x != 0.0)?;
    Some((first, last + 1))
}

fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(size, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|z| (z.re * scale).max(0.0)).collect()
}

/// Full linear convolution of two nonnegative sequences.
fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    let (Some((a0, a1)), Some((b0, b1))) = (nonzero_range(a), nonzero_range(b)) else {
        return out;
    };
    let (ta, tb) = (&a[a0..a1], &b[b0..b1]);
    let dest = &mut out[a0 + b0..a0 + b0 + ta.len() + tb.len() - 1];
    if ta.len() * tb.len() <= DIRECT_LIMIT {
        for (i, &x) in ta.iter().enumerate() {
            for (d, &y) in dest[i..i + tb.len()].iter_mut().zip(tb) {
                *d += x * y;
            }
        }
    } else {
        dest.copy_from_slice(&fft_convolve(ta, tb));
    }
    out
}

/// One autoconvolution stage: `current ⊛ base · Δf`, truncated in same mode
/// and folded in circular mode.
fn stage(current: &[f64], base: &[f64], step: f64, mode: ConvMode) -> Vec<f64> {
    let mut full = convolve(current, base);
    full.iter_mut().for_each(|v| *v *= step);
    let offset = base.len() / 2;
    match mode {
        ConvMode::Full => full,
        ConvMode::Same => full[offset..offset + current.len()].to_vec(),
        ConvMode::Circular => {
            let l = current.len();
            let mut out = vec![0.0; l];
            for (m, v) in full.iter().enumerate() {
                out[(m + l - offset) % l] += v;
            }
            out
        }
    }
}

fn full_start(s: &Spectrum, k: usize) -> f64 {
    s.f_start_hz - ((k - 1) * s.centre_bin()) as f64 * s.f_step_hz
}

fn check_unit_area(s: &Spectrum) -> Result<()> {
    let area = s.area();
    if (area - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("autoconvolution needs a unit-area spectrum, area is {area}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoconvolution {
    pub spectrum: Spectrum,
    /// Area removed by same-mode truncation (zero in full mode).
    pub lost_area: f64,
}

/// k-fold autoconvolution of a unit-area spectrum by iterated pairwise convolution.
pub fn autoconvolve(s: &Spectrum, k: usize, mode: ConvMode) -> Result<Autoconvolution> {
    if k < 1 {
        return Err(Error::Domain("autoconvolution order must be at least 1".into()));
    }
    check_unit_area(s)?;
    let mut current = s.values.clone();
    for _ in 1..k {
        current = stage(&current, &s.values, s.f_step_hz, mode);
    }
    let f_start = match mode {
        ConvMode::Same | ConvMode::Circular => s.f_start_hz,
        ConvMode::Full => full_start(s, k),
    };
    let spectrum =
        Spectrum { f_start_hz: f_start, f_step_hz: s.f_step_hz, values: current, unit: SpectrumUnit::UnitAreaDensity };
    let lost_area = if k == 1 || mode != ConvMode::Same { 0.0 } else { 1.0 - spectrum.area() };
    Ok(Autoconvolution { spectrum, lost_area })
}

/// Output spectrum split into first-order signal and higher-order distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpectra {
    pub mode: ConvMode,
    /// Unit-area (before truncation) autoconvolutions on the output grid.
    pub per_k: BTreeMap<usize, Spectrum>,
    pub lost_area: BTreeMap<usize, f64>,
    pub signal: Spectrum,
    pub distortion: Spectrum,
    pub total: Spectrum,
    /// `t_0`, kept as a scalar rather than painted onto the grid.
    pub dc_power: f64,
    pub term_powers: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ComponentSpectra {
    /// `t_k · per_k` on the output grid.
    pub fn weighted(&self, k: usize) -> Option<Spectrum> {
        let s = self.per_k.get(&k)?;
        let t = self.term_powers[k];
        Some(s.with_values(s.values.iter().map(|v| v * t).collect(), SpectrumUnit::PowerDensity))
    }

    /// `Σ t_k (1 − lost_k)` over the synthesised orders.
    pub fn expected_total_power(&self) -> f64 {
        self.lost_area.iter().map(|(&k, &lost)| self.term_powers[k] * (1.0 - lost)).sum()
    }
}

fn embed(values: &[f64], offset: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out[offset..offset + values.len()].copy_from_slice(values);
    out
}

/// Weighted sum of autoconvolutions of the normalised input spectrum.
pub fn predict_output_spectrum(weights: &WeightSeries, s_in: &Spectrum, mode: ConvMode) -> Result<ComponentSpectra> {
    let base = normalize_to_unit_area(s_in)?;
    let total_t: f64 = weights.term_powers.iter().sum();
    if !(total_t > 0.0) {
        return Err(Error::Degenerate("weight series carries no power".into()));
    }
    let included: Vec<usize> =
        (1..=weights.k_max).filter(|&k| weights.term_powers[k] / total_t > NEGLIGIBLE_ORDER).collect();
    let Some(&k_top) = included.last() else {
        return Err(Error::Degenerate("no order above the negligible-power threshold".into()));
    };
    let l = base.len();
    let centre = base.centre_bin();
    let (out_len, out_start) = match mode {
        ConvMode::Same | ConvMode::Circular => (l, base.f_start_hz),
        ConvMode::Full => (k_top * (l - 1) + 1, full_start(&base, k_top)),
    };

    let mut per_k = BTreeMap::new();
    let mut lost_area = BTreeMap::new();
    let mut current = base.values.clone();
    for k in 1..=k_top {
        if k > 1 {
            current = stage(&current, &base.values, base.f_step_hz, mode);
        }
        if !included.contains(&k) {
            continue;
        }
        let area = current.iter().sum::<f64>() * base.f_step_hz;
        let lost = if mode == ConvMode::Same && k > 1 { 1.0 - area } else { 0.0 };
        let values = match mode {
            ConvMode::Same | ConvMode::Circular => current.clone(),
            ConvMode::Full => embed(&current, (k_top - k) * centre, out_len),
        };
        per_k.insert(
            k,
            Spectrum { f_start_hz: out_start, f_step_hz: base.f_step_hz, values, unit: SpectrumUnit::UnitAreaDensity },
        );
        lost_area.insert(k, lost);
    }

    let mut warnings = Vec::new();
    let truncated: Vec<(usize, f64)> =
        lost_area.iter().filter(|(_, l)| **l > LOST_AREA_WARNING).map(|(k, l)| (*k, *l)).collect();
    if let (Some(first), Some(worst)) = (truncated.first(), truncated.iter().max_by(|a, b| a.1.total_cmp(&b.1))) {
        warnings.push(format!(
            "same-mode truncation removes more than {:.0}% of the area of {} order(s) from k = {} up \
             (worst {:.1}% at k = {}); use full mode for exact power accounting",
            100.0 * LOST_AREA_WARNING,
            truncated.len(),
            first.0,
            100.0 * worst.1,
            worst.0
        ));
    }
    let mut signal = vec![0.0; out_len];
    let mut distortion = vec![0.0; out_len];
    for (&k, s) in &per_k {
        let t = weights.term_powers[k];
        let dest = if k == 1 { &mut signal } else { &mut distortion };
        for (d, v) in dest.iter_mut().zip(&s.values) {
            *d += t * v;
        }
    }
    let total: Vec<f64> = signal.iter().zip(&distortion).map(|(a, b)| a + b).collect();
    let grid = |values| Spectrum {
        f_start_hz: out_start,
        f_step_hz: base.f_step_hz,
        values,
        unit: SpectrumUnit::PowerDensity,
    };
    Ok(ComponentSpectra {
        mode,
        per_k,
        lost_area,
        signal: grid(signal),
        distortion: grid(distortion),
        total: grid(total),
        dc_power: weights.term_powers[0],
        term_powers: weights.term_powers.clone(),
        warnings,
    })
}

/// Linear power of a spectrum: plain sum for per-bin power, `Σ·Δf` for densities.
pub fn integrate_power(s: &Spectrum) -> f64 {
    match s.unit {
        SpectrumUnit::LinearPower => s.values.iter().sum(),
        SpectrumUnit::PowerDensity | SpectrumUnit::UnitAreaDensity => s.area(),
    }
}

/// Inclusive frequency interval in hertz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

fn band_power(s: &Spectrum, band: &Band) -> f64 {
    let sum: f64 = (0..s.len())
        .filter(|&i| {
            let f = s.frequency(i);
            f >= band.lo_hz && f <= band.hi_hz
        })
        .map(|i| s.values[i])
        .sum();
    sum * s.f_step_hz
}

/// SDR in dB from the synthesised spectra, over the whole grid or one band.
/// `include_dc` adds the DC term to the distortion for whole-grid ratios.
pub fn sdr_from_spectra(cs: &ComponentSpectra, band: Option<Band>, include_dc: bool) -> Result<f64> {
    let (signal, distortion) = match band {
        None => {
            let dc = if include_dc { cs.dc_power } else { 0.0 };
            (integrate_power(&cs.signal), integrate_power(&cs.distortion) + dc)
        }
        Some(b) => {
            let half = 0.5 * cs.signal.f_step_hz;
            let inside =
                b.lo_hz <= b.hi_hz && b.lo_hz >= cs.signal.f_start_hz - half && b.hi_hz <= cs.signal.f_stop_hz() + half;
            if !inside {
                return Err(Error::Domain(format!(
                    "band [{}, {}] Hz is outside the grid [{}, {}] Hz",
                    b.lo_hz,
                    b.hi_hz,
                    cs.signal.f_start_hz,
                    cs.signal.f_stop_hz()
                )));
            }
            (band_power(&cs.signal, &b), band_power(&cs.distortion, &b))
        }
    };
    match (signal > 0.0, distortion > 0.0) {
        (_, false) if signal > 0.0 => Ok(f64::INFINITY),
        (false, false) => Err(Error::Degenerate("band holds neither signal nor distortion power".into())),
        _ => Ok(10.0 * signal.log10() - 10.0 * distortion.log10()),
    }
}

/// Per-bin power of a density bin in dBm into `r_ohm`; `None` for empty bins.
fn bin_dbm(density: f64, step: f64, r_ohm: f64) -> Option<f64> {
    let watts = density * step / r_ohm;
    (watts > 0.0).then(|| 10.0 * watts.log10() + 30.0)
}

/// `freq_hz,total_dbm,signal_dbm,distortion_dbm,k<n>_dbm...` with the
/// per-order columns for every synthesised order above one.
pub fn spectrum_csv(cs: &ComponentSpectra, r_ohm: f64) -> String {
    let orders: Vec<usize> = cs.per_k.keys().copied().filter(|&k| k > 1).collect();
    let weighted: Vec<Spectrum> = orders.iter().filter_map(|&k| cs.weighted(k)).collect();
    let mut out = String::from("freq_hz,total_dbm,signal_dbm,distortion_dbm");
    for k in &orders {
        let _ = write!(out, ",k{k}_dbm");
    }
    out.push('\n');
    let step = cs.total.f_step_hz;
    let cell = |v: f64| bin_dbm(v, step, r_ohm).map(|d| d.to_string()).unwrap_or_default();
    for i in 0..cs.total.len() {
        let _ = write!(
            out,
            "{},{},{},{}",
            cs.total.frequency(i),
            cell(cs.total.values[i]),
            cell(cs.signal.values[i]),
            cell(cs.distortion.values[i])
        );
        for w in &weighted {
            let _ = write!(out, ",{}", cell(w.values[i]));
        }
        out.push('\n');
    }
    out
}
