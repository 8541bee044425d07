//! Periodic extension of a device transfer function and its Fourier series.
//!
//! The input signal amplitude is bounded in practice, so the device only needs
//! to be described on `[-c, c]`. Outside the measured range the curve is
//! carried to a flat plateau and brought back to zero before `c`, which makes
//! the `2c`-periodic odd extension continuously differentiable everywhere.

mod coefficients;
mod pchip;

pub use coefficients::{
    fourier_coefficients_from_samples, hard_limiter_coefficients, reconstruct, CoefficientFile, FourierCoefficients,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use pchip::Pchip;

pub const DEFAULT_N: usize = 8001;

/// Fraction of the headroom interval `(v_max, c]` used by each cosine blend.
pub const BLEND_FRACTION: f64 = 0.1;

/// Sampled complex voltage transfer function, `v_in` ascending from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCurve {
    points: Vec<(f64, Complex64)>,
    r_ohm: f64,
    label: String,
}

impl TransferCurve {
    pub fn new(points: Vec<(f64, Complex64)>, r_ohm: f64, label: impl Into<String>) -> Result<Self> {
        match points.first() {
            Some(&(v, out)) if v == 0.0 && out == Complex64::new(0.0, 0.0) => {}
            _ => return Err(Error::Domain("transfer curve must start at (0, 0)".into())),
        }
        if points.len() < 2 {
            return Err(Error::InsufficientData("transfer curve needs a point beyond the origin".into()));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Ordering(format!("v_in {} does not increase past {}", w[1].0, w[0].0)));
        }
        if points.iter().any(|(v, o)| !v.is_finite() || !o.re.is_finite() || !o.im.is_finite()) {
            return Err(Error::Domain("transfer curve contains non-finite values".into()));
        }
        Ok(Self { points, r_ohm, label: label.into() })
    }

    /// Real-valued curve sampled from a function on `(0, v_max]`.
    pub fn from_fn(
        f: impl Fn(f64) -> f64,
        v_max: f64,
        count: usize,
        r_ohm: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut points = vec![(0.0, Complex64::new(0.0, 0.0))];
        points.extend((1..=count).map(|i| {
            let v = v_max * i as f64 / count as f64;
            (v, Complex64::new(f(v), 0.0))
        }));
        Self::new(points, r_ohm, label)
    }

    pub fn points(&self) -> &[(f64, Complex64)] {
        &self.points
    }

    pub fn r_ohm(&self) -> f64 {
        self.r_ohm
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn v_max(&self) -> f64 {
        self.points.last().map(|p| p.0).unwrap_or(0.0)
    }

    pub fn is_real(&self) -> bool {
        self.points.iter().all(|(_, o)| o.im == 0.0)
    }
}

/// The extended nonlinearity sampled on the symmetric grid `x_m = 2c·m/N`,
/// `m = -(N-1)/2 ..= (N-1)/2`, stored in ascending `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicExtension {
    pub c: f64,
    pub n: usize,
    pub samples: Vec<Complex64>,
    pub extension_meta: String,
}

impl PeriodicExtension {
    pub fn half_len(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn x(&self, index: usize) -> f64 {
        grid_x(self.c, self.n, index)
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.samples.iter().enumerate().map(|(i, s)| (self.x(i), *s))
    }
}

pub(crate) fn grid_x(c: f64, n: usize, index: usize) -> f64 {
    let m = index as f64 - ((n - 1) / 2) as f64;
    2.0 * c * m / n as f64
}

pub(crate) fn check_parity(n: usize) -> Result<()> {
    if n.is_multiple_of(2) || n < 3 {
        Err(Error::Parity(n))
    } else {
        Ok(())
    }
}

/// Closed-form odd nonlinearities used as fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AnalyticModel {
    Signum,
    /// `v_sat · tanh(gain · x / v_sat)`.
    ScaledTanh {
        gain: f64,
        v_sat: f64,
    },
    /// `a1·x + a3·x³ + a5·x⁵`.
    OddPolynomial {
        a1: f64,
        a3: f64,
        a5: f64,
    },
}

impl AnalyticModel {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            AnalyticModel::Signum => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            AnalyticModel::ScaledTanh { gain, v_sat } => {
                if v_sat.is_infinite() {
                    gain * x
                } else {
                    v_sat * (gain * x / v_sat).tanh()
                }
            }
            AnalyticModel::OddPolynomial { a1, a3, a5 } => {
                let x2 = x * x;
                x * (a1 + x2 * (a3 + x2 * a5))
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            AnalyticModel::Signum => "signum".to_string(),
            AnalyticModel::ScaledTanh { gain, v_sat } => format!("scaled_tanh(gain={gain}, v_sat={v_sat})"),
            AnalyticModel::OddPolynomial { a1, a3, a5 } => {
                format!("odd_polynomial(a1={a1}, a3={a3}, a5={a5})")
            }
        }
    }
}

/// Magnitude/phase interpolation of a measured curve on `[0, v_max]`.
#[derive(Debug, Clone)]
struct CurveInterpolant {
    v_first: f64,
    gain_first: Complex64,
    v_max: f64,
    mag_phase: Option<(Pchip, Pchip)>,
}

impl CurveInterpolant {
    fn new(curve: &TransferCurve) -> Self {
        let nodes = &curve.points()[1..];
        let (v_first, out_first) = nodes[0];
        let gain_first = out_first / v_first;
        let mag_phase = (nodes.len() >= 2).then(|| {
            let x: Vec<f64> = nodes.iter().map(|p| p.0).collect();
            let mag: Vec<f64> = nodes.iter().map(|p| p.1.norm()).collect();
            let mut phase: Vec<f64> = Vec::with_capacity(nodes.len());
            for p in nodes {
                let raw = p.1.arg();
                let unwrapped = match phase.last() {
                    Some(&prev) => raw + 2.0 * PI * ((prev - raw) / (2.0 * PI)).round(),
                    None => raw,
                };
                phase.push(unwrapped);
            }
            (Pchip::new(x.clone(), mag), Pchip::new(x, phase))
        });
        Self { v_first, gain_first, v_max: curve.v_max(), mag_phase }
    }

    /// Value and derivative for `0 <= x <= v_max`.
    fn eval_with_slope(&self, x: f64) -> (Complex64, Complex64) {
        match &self.mag_phase {
            Some((mag, phase)) if x >= self.v_first => {
                let (m, dm) = mag.eval_with_slope(x);
                let (ph, dph) = phase.eval_with_slope(x);
                let rot = Complex64::from_polar(1.0, ph);
                (rot * m, rot * Complex64::new(dm, m * dph))
            }
            _ => (self.gain_first * x, self.gain_first),
        }
    }
}

#[derive(Debug, Clone)]
struct CurveExtension {
    interp: CurveInterpolant,
    blend_width: f64,
    end_value: Complex64,
    end_slope: Complex64,
    plateau: Complex64,
}

impl CurveExtension {
    fn new(curve: &TransferCurve, c: f64) -> Self {
        let interp = CurveInterpolant::new(curve);
        let v_max = curve.v_max();
        let (end_value, end_slope) = interp.eval_with_slope(v_max);
        let blend_width = BLEND_FRACTION * (c - v_max);
        let plateau = end_value + end_slope * (0.5 * blend_width);
        Self { interp, blend_width, end_value, end_slope, plateau }
    }

    fn eval_pos(&self, x: f64, c: f64) -> Complex64 {
        let v_max = self.interp.v_max;
        let w = self.blend_width;
        if x <= v_max || w <= 0.0 {
            return self.interp.eval_with_slope(x.min(v_max)).0;
        }
        let u = x - v_max;
        if u <= w {
            // Slope eased from the measured end slope to zero.
            let ramp = u + (w / PI) * (PI * u / w).sin();
            return self.end_value + self.end_slope * (0.5 * ramp);
        }
        let fall_start = c - w;
        if x < fall_start {
            return self.plateau;
        }
        let s = ((x - fall_start) / w).min(1.0);
        self.plateau * (0.5 * (1.0 + (PI * s).cos()))
    }
}

#[derive(Debug, Clone)]
enum DeviceKind {
    Curve(Box<CurveExtension>),
    Analytic(AnalyticModel),
    /// Periodic samples recovered from a coefficient set, linearly interpolated.
    Sampled(Vec<Complex64>),
}

/// Evaluates the periodically extended nonlinearity on `[-c, c]`.
///
/// This is the single evaluation path shared by [`build_periodic_extension`]
/// and the time-domain oracle.
#[derive(Debug, Clone)]
pub struct DeviceFunction {
    c: f64,
    kind: DeviceKind,
    real: bool,
    label: String,
}

impl DeviceFunction {
    pub fn from_curve(curve: &TransferCurve, c: f64) -> Result<Self> {
        let v_max = curve.v_max();
        if !(c >= v_max) {
            return Err(Error::PeriodTooSmall { c, v_max });
        }
        Ok(Self {
            c,
            kind: DeviceKind::Curve(Box::new(CurveExtension::new(curve, c))),
            real: curve.is_real(),
            label: curve.label().to_string(),
        })
    }

    pub fn analytic(model: AnalyticModel, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("half-period must be positive, got {c}")));
        }
        Ok(Self { c, kind: DeviceKind::Analytic(model), real: true, label: model.describe() })
    }

    /// The function represented by a coefficient set, sampled by inverse DFT.
    pub fn from_coefficients(coeffs: &FourierCoefficients) -> Self {
        let samples = coeffs.samples();
        let peak = samples.iter().map(|s| s.re.abs()).fold(0.0, f64::max);
        let imag = samples.iter().map(|s| s.im.abs()).fold(0.0, f64::max);
        Self {
            c: coeffs.c,
            real: imag <= 1e-9 * peak.max(f64::MIN_POSITIVE),
            kind: DeviceKind::Sampled(samples),
            label: coeffs.source_label.clone(),
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `p(x)` for `|x| <= c`. Never wraps silently.
    pub fn eval(&self, x: f64) -> Result<Complex64> {
        if !(x.abs() <= self.c) {
            return Err(Error::Domain(format!("input {x} V outside the extension interval ±{} V", self.c)));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> Complex64 {
        match &self.kind {
            DeviceKind::Sampled(samples) => sampled_eval(samples, self.c, x),
            _ if x < 0.0 => -self.eval_pos(-x),
            _ => self.eval_pos(x),
        }
    }

    fn eval_pos(&self, x: f64) -> Complex64 {
        match &self.kind {
            DeviceKind::Curve(ext) => ext.eval_pos(x, self.c),
            DeviceKind::Analytic(model) => Complex64::new(model.eval(x), 0.0),
            DeviceKind::Sampled(samples) => sampled_eval(samples, self.c, x),
        }
    }
}

fn sampled_eval(samples: &[Complex64], c: f64, x: f64) -> Complex64 {
    let n = samples.len();
    let half = ((n - 1) / 2) as f64;
    let pos = x * n as f64 / (2.0 * c) + half;
    let lo = pos.floor();
    let frac = pos - lo;
    let wrap = |i: f64| samples[(i as i64).rem_euclid(n as i64) as usize];
    wrap(lo) * (1.0 - frac) + wrap(lo + 1.0) * frac
}

/// Convenient half-period: four times the largest input, rounded to 0.1 V.
pub fn default_half_period(v_max: f64) -> f64 {
    ((4.0 * v_max * 10.0).round() / 10.0).max(v_max)
}

fn sample_device(device: &DeviceFunction, n: usize) -> Vec<Complex64> {
    (0..n).map(|i| device.eval_unchecked(grid_x(device.c, n, i))).collect()
}

/// Extends a measured curve to a `2c`-periodic odd function and samples it.
pub fn build_periodic_extension(curve: &TransferCurve, c: f64, n: usize) -> Result<PeriodicExtension> {
    check_parity(n)?;
    let device = DeviceFunction::from_curve(curve, c)?;
    let v_max = curve.v_max();
    let meta = if c > v_max {
        format!(
            "{}: monotone cubic magnitude/phase on [0, {v_max}] V, C1 cosine blend to plateau over {:.6} V, \
             cosine return to zero at c = {c} V, odd reflection",
            curve.label(),
            BLEND_FRACTION * (c - v_max)
        )
    } else {
        format!("{}: monotone cubic magnitude/phase on [0, {v_max}] V, odd reflection, no headroom", curve.label())
    };
    Ok(PeriodicExtension { c, n, samples: sample_device(&device, n), extension_meta: meta })
}

/// Samples an analytic model, odd-reflected and `2c`-periodic.
pub fn analytic_model_samples(model: AnalyticModel, c: f64, n: usize) -> Result<PeriodicExtension> {
    check_parity(n)?;
    let device = DeviceFunction::analytic(model, c)?;
    Ok(PeriodicExtension {
        c,
        n,
        samples: sample_device(&device, n),
        extension_meta: format!("{}: analytic on [-{c}, {c}] V, odd reflection", model.describe()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn curve_must_start_at_origin() {
        assert!(TransferCurve::new(vec![(0.1, c(1.0)), (0.2, c(2.0))], 50.0, "x").is_err());
        assert!(TransferCurve::new(vec![(0.0, c(0.0)), (0.2, c(2.0)), (0.2, c(2.0))], 50.0, "x").is_err());
    }

    #[test]
    fn limiter_curve_approximates_signum() {
        let eps = 1e-3;
        let curve = TransferCurve::new(vec![(0.0, c(0.0)), (eps, c(1.0)), (1.0, c(1.0))], 50.0, "limiter").unwrap();
        let ext = build_periodic_extension(&curve, 1.0, 1001).unwrap();
        for (x, s) in ext.grid() {
            if x.abs() > eps {
                assert!((s.re - x.signum()).abs() < 1e-12, "x={x} s={s}");
            }
            assert_eq!(s.im, 0.0);
        }
    }

    #[test]
    fn linear_curve_gives_exact_ramp() {
        let curve = TransferCurve::new(vec![(0.0, c(0.0)), (0.5, c(1.0)), (1.0, c(2.0))], 50.0, "linear").unwrap();
        let ext = build_periodic_extension(&curve, 1.0, 101).unwrap();
        for (x, s) in ext.grid() {
            assert!((s.re - 2.0 * x).abs() < 1e-13);
        }
    }

    #[test]
    fn headroom_is_c1_and_returns_to_zero() {
        let curve = TransferCurve::from_fn(|v| (2.0 * v).tanh(), 0.7, 20, 50.0, "tanh").unwrap();
        let cc = 2.8;
        let dev = DeviceFunction::from_curve(&curve, cc).unwrap();
        let h = 1e-6;
        let v_max = 0.7;
        let w = BLEND_FRACTION * (cc - v_max);
        for &x0 in &[v_max, v_max + w, cc - w] {
            let left = (dev.eval(x0).unwrap() - dev.eval(x0 - h).unwrap()) / h;
            let right = (dev.eval(x0 + h).unwrap() - dev.eval(x0).unwrap()) / h;
            assert!((left - right).norm() < 1e-4, "slope jump at {x0}: {left} vs {right}");
        }
        assert!(dev.eval(cc).unwrap().norm() < 1e-15);
        let plateau = dev.eval(1.5).unwrap().re;
        assert!(plateau >= (1.4f64).tanh() && plateau < 1.0);
        // Odd reflection.
        for &x in &[0.1, 0.69, 1.0, 2.7] {
            assert!((dev.eval(-x).unwrap() + dev.eval(x).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn am_pm_curve_stays_complex() {
        let pts = vec![
            (0.0, c(0.0)),
            (0.1, Complex64::from_polar(1.0, 0.0)),
            (0.2, Complex64::from_polar(1.9, 0.1)),
            (0.3, Complex64::from_polar(2.5, 0.3)),
        ];
        let curve = TransferCurve::new(pts, 50.0, "ampm").unwrap();
        let dev = DeviceFunction::from_curve(&curve, 1.2).unwrap();
        assert!(!dev.is_real());
        let v = dev.eval(0.2).unwrap();
        assert!((v.norm() - 1.9).abs() < 1e-12 && (v.arg() - 0.1).abs() < 1e-12);
        // Below the first node: small-signal gain through the origin.
        assert!((dev.eval(0.05).unwrap() - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn period_and_parity_errors() {
        let curve = TransferCurve::new(vec![(0.0, c(0.0)), (0.5, c(1.0)), (1.0, c(2.0))], 50.0, "l").unwrap();
        assert!(matches!(build_periodic_extension(&curve, 0.9, 101), Err(Error::PeriodTooSmall { .. })));
        assert!(matches!(build_periodic_extension(&curve, 1.0, 100), Err(Error::Parity(100))));
    }

    #[test]
    fn eval_outside_interval_is_error() {
        let dev = DeviceFunction::analytic(AnalyticModel::Signum, 1.0).unwrap();
        assert!(dev.eval(1.0).is_ok());
        assert!(matches!(dev.eval(1.0001), Err(Error::Domain(_))));
    }

    #[test]
    fn analytic_models() {
        let lin = AnalyticModel::ScaledTanh { gain: 1.0, v_sat: 1e6 };
        assert!((lin.eval(0.3) - 0.3).abs() < 1e-12);
        let cubic = AnalyticModel::OddPolynomial { a1: 1.0, a3: -1.0 / 6.0, a5: 0.0 };
        for &x in &[0.01, 0.05, 0.1] {
            // Third-order truncation of sin(x).
            assert!((cubic.eval(x) - x.sin()).abs() < x.powi(5) / 120.0 * 1.01);
        }
        assert_eq!(AnalyticModel::Signum.eval(0.0), 0.0);
        let ext = analytic_model_samples(AnalyticModel::Signum, 1.0, 11).unwrap();
        assert_eq!(ext.samples[5], c(0.0));
        assert_eq!(ext.samples[6], c(1.0));
        assert_eq!(ext.samples[0], c(-1.0));
    }

    #[test]
    fn default_half_period_matches_amplifier_example() {
        assert!((default_half_period(0.708) - 2.8).abs() < 1e-12);
    }
}
