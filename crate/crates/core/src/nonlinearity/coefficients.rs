use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{check_parity, grid_x, AnalyticModel, DeviceFunction, PeriodicExtension};
use crate::error::{Error, Result};

/// Fourier-series coefficients `F_λ`, `λ = -(N-1)/2 ..= (N-1)/2`, of a
/// `2c`-periodic nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub c: f64,
    pub n: usize,
    /// Indexed by `λ + (N-1)/2`.
    pub coeffs: Vec<Complex64>,
    /// Largest `|Σ F_λ e^{jλπx/c} - p(x)|` over the sample grid.
    pub reconstruction_error: f64,
    pub extension_meta: String,
    pub source_label: String,
}

impl FourierCoefficients {
    pub fn half_len(&self) -> usize {
        (self.n - 1) / 2
    }

    /// `F_λ`, zero outside the stored range.
    pub fn get(&self, lambda: i64) -> Complex64 {
        let m = self.half_len() as i64;
        if lambda.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(lambda + m) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let m = self.half_len() as i64;
        self.coeffs.iter().enumerate().map(move |(i, f)| (i as i64 - m, *f))
    }

    /// Every coefficient multiplied by a real gain.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|f| f * gain).collect(),
            reconstruction_error: self.reconstruction_error * gain.abs(),
            ..self.clone()
        }
    }

    /// Whether `F_{-λ} = conj(F_λ)`, i.e. the underlying samples are real.
    pub fn is_conjugate_symmetric(&self, rel_tol: f64) -> bool {
        let peak = self.coeffs.iter().map(|f| f.norm()).fold(0.0, f64::max);
        let m = self.half_len() as i64;
        (1..=m).all(|l| (self.get(-l) - self.get(l).conj()).norm() <= rel_tol * peak)
            && self.get(0).im.abs() <= rel_tol * peak
    }

    /// Values of the series on the sample grid, ascending in `x` (inverse DFT).
    pub fn samples(&self) -> Vec<Complex64> {
        let n = self.n;
        let m = self.half_len();
        // Coefficients in FFT order: λ = 0, 1, .., m, -m, .., -1.
        let mut buf: Vec<Complex64> =
            (0..n).map(|k| if k <= m { self.get(k as i64) } else { self.get(k as i64 - n as i64) }).collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        // Position n in FFT order holds x_m with m = n (n <= M) or n - N.
        (0..n).map(|i| buf[(i + n - m) % n]).collect()
    }

    pub fn to_file(&self) -> CoefficientFile {
        CoefficientFile {
            c: self.c,
            n: self.n,
            coeffs: self.coeffs.iter().map(|f| [f.re, f.im]).collect(),
            extension_meta: self.extension_meta.clone(),
            source_label: self.source_label.clone(),
            reconstruction_error: Some(self.reconstruction_error),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CoefficientFile = serde_json::from_str(text)?;
        Self::try_from(file)
    }
}

/// On-disk coefficient schema. Floats are written in shortest round-trip form,
/// so a write/read cycle is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub c: f64,
    pub n: usize,
    /// `[re, im]` pairs in ascending λ.
    pub coeffs: Vec<[f64; 2]>,
    pub extension_meta: String,
    pub source_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction_error: Option<f64>,
}

impl TryFrom<CoefficientFile> for FourierCoefficients {
    type Error = Error;

    fn try_from(file: CoefficientFile) -> Result<Self> {
        check_parity(file.n)?;
        if file.coeffs.len() != file.n {
            return Err(Error::Domain(format!(
                "coefficient file declares n = {} but holds {} coefficients",
                file.n,
                file.coeffs.len()
            )));
        }
        if !(file.c > 0.0) {
            return Err(Error::Domain(format!("half-period must be positive, got {}", file.c)));
        }
        Ok(Self {
            c: file.c,
            n: file.n,
            coeffs: file.coeffs.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            reconstruction_error: file.reconstruction_error.unwrap_or(f64::NAN),
            extension_meta: file.extension_meta,
            source_label: file.source_label,
        })
    }
}

fn max_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `F_λ ≈ DFT_N{p(x_n)} / N` with the sequence rotated to start at `x = 0`.
pub fn fourier_coefficients_from_samples(ext: &PeriodicExtension) -> FourierCoefficients {
    let n = ext.n;
    let m = ext.half_len();
    let mut buf: Vec<Complex64> = (0..n).map(|k| ext.samples[(k + m) % n]).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let coeffs: Vec<Complex64> = (0..n)
        .map(|i| {
            let lambda = i as i64 - m as i64;
            buf[lambda.rem_euclid(n as i64) as usize] * scale
        })
        .collect();
    let mut out = FourierCoefficients {
        c: ext.c,
        n,
        coeffs,
        reconstruction_error: 0.0,
        extension_meta: ext.extension_meta.clone(),
        source_label: ext.extension_meta.split(':').next().unwrap_or("").to_string(),
    };
    out.reconstruction_error = max_deviation(&out.samples(), &ext.samples);
    out
}

/// Exact series of the `2c`-periodic square wave: `F_λ = -2j/(λπ)` for odd λ, else 0.
pub fn hard_limiter_coefficients(n: usize, c: f64) -> Result<FourierCoefficients> {
    check_parity(n)?;
    let m = ((n - 1) / 2) as i64;
    let coeffs: Vec<Complex64> = (-m..=m)
        .map(|l| if l % 2 == 0 { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, -2.0 / (l as f64 * PI)) })
        .collect();
    let mut out = FourierCoefficients {
        c,
        n,
        coeffs,
        reconstruction_error: 0.0,
        extension_meta: format!("analytic square wave, period {}", 2.0 * c),
        source_label: "signum".to_string(),
    };
    let device = DeviceFunction::analytic(AnalyticModel::Signum, c)?;
    let exact: Vec<Complex64> = (0..n).map(|i| device.eval_unchecked(grid_x(c, n, i))).collect();
    out.reconstruction_error = max_deviation(&out.samples(), &exact);
    Ok(out)
}

/// Partial Fourier sum `Σ_λ F_λ e^{jλπx/c}` for `|x| <= c`.
pub fn reconstruct(coeffs: &FourierCoefficients, x: f64) -> Result<Complex64> {
    if !(x.abs() <= coeffs.c) {
        return Err(Error::Domain(format!("x = {x} outside [-{c}, {c}]", c = coeffs.c)));
    }
    let theta = PI * x / coeffs.c;
    let mut sum = Complex64::new(0.0, 0.0);
    // Outermost harmonics first so the dominant low orders are added last.
    let m = coeffs.half_len() as i64;
    for l in (1..=m).rev() {
        for lambda in [l, -l] {
            sum += coeffs.get(lambda) * Complex64::from_polar(1.0, lambda as f64 * theta);
        }
    }
    Ok(sum + coeffs.get(0))
}

#[cfg(test)]
mod tests {
    use super::super::analytic_model_samples;
    use super::*;
    use proptest::prelude::*;

    fn sine_extension(c: f64, n: usize) -> PeriodicExtension {
        let samples = (0..n).map(|i| Complex64::new((PI * grid_x(c, n, i) / c).sin(), 0.0)).collect();
        PeriodicExtension { c, n, samples, extension_meta: "sine".into() }
    }

    #[test]
    fn single_harmonic_is_exact() {
        let f = fourier_coefficients_from_samples(&sine_extension(2.0, 101));
        let half_over_j = Complex64::new(0.0, -0.5);
        assert!((f.get(1) - half_over_j).norm() < 1e-15);
        assert!((f.get(-1) + half_over_j).norm() < 1e-15);
        for (l, v) in f.iter() {
            if l.abs() != 1 {
                assert!(v.norm() < 1e-12, "λ={l}: {v}");
            }
        }
        assert!(f.reconstruction_error < 1e-14);
    }

    #[test]
    fn constant_is_dc_only() {
        let n = 51;
        let ext =
            PeriodicExtension { c: 1.0, n, samples: vec![Complex64::new(0.7, 0.0); n], extension_meta: "dc".into() };
        let f = fourier_coefficients_from_samples(&ext);
        assert!((f.get(0) - Complex64::new(0.7, 0.0)).norm() < 1e-15);
        assert!(f.iter().filter(|(l, _)| *l != 0).all(|(_, v)| v.norm() < 1e-15));
    }

    #[test]
    fn hard_limiter_values() {
        let f = hard_limiter_coefficients(8001, 1.0).unwrap();
        assert!((f.get(1) - Complex64::new(0.0, -std::f64::consts::FRAC_2_PI)).norm() < 1e-15);
        assert_eq!(f.get(2), Complex64::new(0.0, 0.0));
        assert!((f.get(-3) - Complex64::new(0.0, std::f64::consts::FRAC_2_PI / 3.0)).norm() < 1e-15);
        assert!(f.is_conjugate_symmetric(1e-15));
        assert!(matches!(hard_limiter_coefficients(8000, 1.0), Err(Error::Parity(8000))));
    }

    #[test]
    fn sampled_signum_odd_symmetry() {
        let f = fourier_coefficients_from_samples(&analytic_model_samples(AnalyticModel::Signum, 1.0, 8001).unwrap());
        let peak = f.get(1).norm();
        for (_, v) in f.iter() {
            assert!(v.re.abs() < 1e-10 * peak);
        }
        // Leading odd coefficient close to the analytic −2j/π.
        assert!((f.get(1) - Complex64::new(0.0, -2.0 / PI)).norm() < 1e-6);
    }

    #[test]
    fn reconstruct_limiter_and_sine() {
        let f = hard_limiter_coefficients(8001, 1.0).unwrap();
        assert!((reconstruct(&f, 0.5).unwrap().re - 1.0).abs() < 1e-3);
        assert!(reconstruct(&f, 0.0).unwrap().norm() < 1e-10);
        assert!(matches!(reconstruct(&f, 1.5), Err(Error::Domain(_))));
        let s = fourier_coefficients_from_samples(&sine_extension(2.0, 101));
        assert!((reconstruct(&s, 1.0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_at_samples_round_trips() {
        let ext = analytic_model_samples(AnalyticModel::ScaledTanh { gain: 1.5, v_sat: 0.8 }, 2.0, 401).unwrap();
        let f = fourier_coefficients_from_samples(&ext);
        let peak = ext.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        for i in (0..ext.n).step_by(7) {
            let r = reconstruct(&f, ext.x(i)).unwrap();
            assert!((r - ext.samples[i]).norm() < 1e-10 * peak);
        }
        assert!(f.reconstruction_error < 1e-12);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let ext = analytic_model_samples(AnalyticModel::ScaledTanh { gain: 1.0, v_sat: 1.0 }, 4.0, 201).unwrap();
        let f = fourier_coefficients_from_samples(&ext);
        let back = FourierCoefficients::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn from_json_rejects_bad_shapes() {
        let bad = r#"{"c":1.0,"n":4,"coeffs":[[0,0],[0,0],[0,0],[0,0]],"extension_meta":"","source_label":""}"#;
        assert!(matches!(FourierCoefficients::from_json(bad), Err(Error::Parity(4))));
        let bad = r#"{"c":1.0,"n":3,"coeffs":[[0,0]],"extension_meta":"","source_label":""}"#;
        assert!(matches!(FourierCoefficients::from_json(bad), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn coefficients_are_linear(
            alpha in -3.0f64..3.0,
            a in proptest::collection::vec(-1.0f64..1.0, 63),
            b in proptest::collection::vec(-1.0f64..1.0, 63),
        ) {
            let mk = |v: &[f64]| PeriodicExtension {
                c: 1.0, n: v.len(), samples: v.iter().map(|&x| Complex64::new(x, 0.0)).collect(), extension_meta: String::new(),
            };
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
            let fa = fourier_coefficients_from_samples(&mk(&a));
            let fb = fourier_coefficients_from_samples(&mk(&b));
            let fc = fourier_coefficients_from_samples(&mk(&combo));
            let scale = fc.coeffs.iter().chain(&fa.coeffs).chain(&fb.coeffs).map(|v| v.norm()).fold(1e-300, f64::max);
            for i in 0..63 {
                prop_assert!((fa.coeffs[i] * alpha + fb.coeffs[i] - fc.coeffs[i]).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn real_samples_give_conjugate_symmetry(v in proptest::collection::vec(-2.0f64..2.0, 31)) {
            let ext = PeriodicExtension { c: 1.0, n: 31, samples: v.iter().map(|&x| Complex64::new(x, 0.0)).collect(), extension_meta: String::new() };
            prop_assert!(fourier_coefficients_from_samples(&ext).is_conjugate_symmetric(1e-12));
        }
    }
}
