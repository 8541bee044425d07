use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use chfdist::chf::{sdr_sweep as sweep_rows, validate_price as price_table, ConvergenceDiagnostics, DriveRange};
use chfdist::ingest::{apply_rbw_correction, parse_spectrum_csv, parse_vna_csv, s21_to_transfer_curve};
use chfdist::nonlinearity::{
    analytic_model_samples, build_periodic_extension, default_half_period, fourier_coefficients_from_samples,
    hard_limiter_coefficients,
};
use chfdist::oracle::{resample, run_oracle, OracleConfig, OracleReport, SaturationPolicy};
use chfdist::spectrum::{
    floor_clip, integrate_power, predict_output_spectrum, sdr_from_spectra, spectrum_csv, to_linear, LinearScale,
    Spectrum,
};
use chfdist::{compute_sdr, compute_weights, AnalyticModel, DeviceFunction, FourierCoefficients};
use serde::Serialize;
use serde_json::Value;

use crate::output::{db_value, read_text, write_atomic, write_json};
use crate::{CliError, FitArgs, ModelArgs, ModelKind, OracleArgs, PredictArgs, PriceArgs, SweepArgs};

type CmdResult = Result<(), CliError>;

fn warn(stderr: &mut dyn Write, warnings: &[String]) {
    for w in warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
}

fn analytic_model(args: &ModelArgs, kind: ModelKind) -> AnalyticModel {
    match kind {
        ModelKind::Signum => AnalyticModel::Signum,
        ModelKind::Tanh => AnalyticModel::ScaledTanh { gain: args.gain, v_sat: args.v_sat },
        ModelKind::Poly => AnalyticModel::OddPolynomial { a1: args.a1, a3: args.a3, a5: args.a5 },
    }
}

/// Coefficients and device for a built-in model. The signum uses its exact series.
fn model_device(args: &ModelArgs, c: Option<f64>, n: usize) -> Result<(FourierCoefficients, DeviceFunction), CliError> {
    let kind = args.model.ok_or_else(|| CliError::Input("either a data file or --model is required".into()))?;
    let model = analytic_model(args, kind);
    let c = match (c, kind) {
        (Some(c), _) => c,
        (None, ModelKind::Signum) => 1.0,
        (None, _) => return Err(CliError::Input(format!("--c is required with --model {}", model.describe()))),
    };
    let coeffs = match kind {
        ModelKind::Signum => hard_limiter_coefficients(n, c)?,
        _ => fourier_coefficients_from_samples(&analytic_model_samples(model, c, n)?),
    };
    Ok((coeffs, DeviceFunction::analytic(model, c)?))
}

fn load_coeffs(path: &Path) -> Result<FourierCoefficients, CliError> {
    FourierCoefficients::from_json(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_spectrum(path: &Path, rbw: Option<f64>) -> Result<Spectrum, CliError> {
    let mut trace =
        parse_spectrum_csv(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if let Some(rbw) = rbw {
        trace = apply_rbw_correction(&trace, rbw)?;
    }
    Ok(to_linear(&trace, LinearScale::Watts)?)
}

/// Outermost coefficient magnitude relative to the largest one.
fn coefficient_tail(coeffs: &FourierCoefficients) -> f64 {
    let m = coeffs.half_len() as i64;
    let peak = coeffs.coeffs.iter().map(|f| f.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    coeffs.get(m).norm().max(coeffs.get(-m).norm()) / peak
}

pub fn fit(a: &FitArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let coeffs = match &a.vna {
        Some(path) => {
            let text = read_text(path)?;
            let records = parse_vna_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let curve = s21_to_transfer_curve(&records, a.resistance)?;
            let c = a.c.unwrap_or_else(|| default_half_period(curve.v_max()));
            fourier_coefficients_from_samples(&build_periodic_extension(&curve, c, a.n)?)
        }
        None => model_device(&a.model, a.c, a.n)?.0,
    };
    let tail = coefficient_tail(&coeffs);
    if tail > a.n_tail_tolerance {
        let msg =
            format!("outermost coefficients are {tail:e} of the peak (tolerance {:e}); increase N", a.n_tail_tolerance);
        if a.strict {
            return Err(CliError::Numeric(msg));
        }
        warn(stderr, &[msg]);
    }
    let path = write_atomic(&a.out.out, "coefficients.json", (coeffs.to_json()? + "\n").as_bytes())?;
    let _ = writeln!(stdout, "wrote {}", path.display());
    let _ = writeln!(stdout, "extension: {}", coeffs.extension_meta);
    let _ = writeln!(
        stdout,
        "c = {} V, N = {}, reconstruction error {:e}, coefficient tail {:e}",
        coeffs.c, coeffs.n, coeffs.reconstruction_error, tail
    );
    Ok(())
}

#[derive(Serialize)]
struct PredictReport<'a> {
    command: &'static str,
    coeffs: String,
    spectrum: String,
    device: &'a str,
    c: f64,
    n: usize,
    sigma_v: f64,
    drive_dbm: Option<f64>,
    beta_v: f64,
    resistance_ohm: f64,
    mode: String,
    include_dc: bool,
    floor_clip: bool,
    strict: bool,
    rbw_hz: Option<f64>,
    k_max_requested: Option<usize>,
    k_max: usize,
    k_tail_tolerance: f64,
    n_tail_tolerance: f64,
    sdr_db: Value,
    sdr_weights_db: Value,
    power_unit: &'static str,
    signal_power: f64,
    distortion_power: f64,
    total_power: f64,
    dc_power: f64,
    term_powers: &'a [f64],
    lost_area: BTreeMap<String, f64>,
    diagnostics: &'a ConvergenceDiagnostics,
    warnings: Vec<String>,
}

pub fn predict(a: &PredictArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let coeffs = load_coeffs(&a.coeffs)?;
    let mut input = load_spectrum(&a.spectrum, a.rbw_correction)?;
    if a.floor_clip {
        input = floor_clip(&input);
    }
    let sigma = a.drive.sigma(a.resistance);
    let opts = a.weights.options();
    let weights = compute_weights(&coeffs, sigma, a.beta, &opts)?;
    let cs = predict_output_spectrum(&weights, &input, a.mode)?;
    let sdr = sdr_from_spectra(&cs, None, a.include_dc)?;
    let sdr_weights = compute_sdr(&weights, a.include_dc)?;

    let mut warnings = weights.diagnostics.warnings.clone();
    warnings.extend(cs.warnings.iter().cloned());
    warn(stderr, &warnings);
    let report = PredictReport {
        command: "predict",
        coeffs: a.coeffs.display().to_string(),
        spectrum: a.spectrum.display().to_string(),
        device: &coeffs.source_label,
        c: coeffs.c,
        n: coeffs.n,
        sigma_v: sigma,
        drive_dbm: a.drive.drive_dbm,
        beta_v: a.beta,
        resistance_ohm: a.resistance,
        mode: a.mode.to_string(),
        include_dc: a.include_dc,
        floor_clip: a.floor_clip,
        strict: a.weights.strict,
        rbw_hz: a.rbw_correction,
        k_max_requested: a.weights.k_max,
        k_max: weights.k_max,
        k_tail_tolerance: opts.k_tail_tolerance,
        n_tail_tolerance: opts.n_tail_tolerance,
        sdr_db: db_value(sdr),
        sdr_weights_db: db_value(sdr_weights),
        power_unit: "V^2",
        signal_power: integrate_power(&cs.signal),
        distortion_power: integrate_power(&cs.distortion),
        total_power: integrate_power(&cs.total),
        dc_power: cs.dc_power,
        term_powers: &weights.term_powers,
        lost_area: cs.lost_area.iter().map(|(k, v)| (format!("k{k}"), *v)).collect(),
        diagnostics: &weights.diagnostics,
        warnings,
    };
    let out = &a.out.out;
    let spectrum_path = write_atomic(out, "spectrum.csv", spectrum_csv(&cs, a.resistance).as_bytes())?;
    let report_path = write_json(out, "report.json", &report)?;
    let weights_path = write_json(out, "weights.json", &weights.to_file())?;
    let _ = writeln!(stdout, "SDR {sdr:.4} dB (weights: {sdr_weights:.4} dB), K = {}", weights.k_max);
    for p in [spectrum_path, report_path, weights_path] {
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    Ok(())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sdr_sweep(a: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let coeffs = load_coeffs(&a.coeffs)?;
    let range = DriveRange { start_dbm: a.start, stop_dbm: a.stop, step_db: a.step };
    let rows = sweep_rows(&coeffs, &range, a.beta, a.resistance, &a.weights.options(), a.include_dc)?;
    if a.weights.strict {
        if let Some(bad) = rows.iter().find(|r| r.error.as_deref().is_some_and(|m| m.starts_with("convergence"))) {
            return Err(CliError::Numeric(format!("{} dBm: {}", bad.p_in_dbm, bad.error.as_deref().unwrap_or(""))));
        }
    }
    // Powers in watts into the reference resistance; failed rows carry `error` and go to stderr.
    let mut csv = String::from("p_in_dbm,sigma_v,sdr_db,p_signal,p_distortion\n");
    for r in &rows {
        let sdr = match r.sdr_db {
            Some(v) if v.is_finite() => v.to_string(),
            Some(v) => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
            None => "error".to_string(),
        };
        let _ =
            writeln!(csv, "{},{},{},{},{}", r.p_in_dbm, r.sigma_v, sdr, opt_cell(r.p_signal), opt_cell(r.p_distortion));
        if let Some(e) = &r.error {
            warn(stderr, &[format!("{} dBm: {e}", r.p_in_dbm)]);
        }
    }
    let path = write_atomic(&a.out.out, "sdr_sweep.csv", csv.as_bytes())?;
    let _ = writeln!(stdout, "{} drive levels, wrote {}", rows.len(), path.display());
    Ok(())
}

pub fn validate_price(a: &PriceArgs, stdout: &mut dyn Write) -> CmdResult {
    let started = Instant::now();
    let cmp = price_table(a.n, a.k_max)?;
    let elapsed = started.elapsed();
    let _ = writeln!(stdout, "{:>4}  {:>24}  {:>24}  {:>12}", "k", "t_k", "arcsine", "error");
    for row in &cmp.rows {
        let _ =
            writeln!(stdout, "{:>4}  {:>24.17e}  {:>24.17e}  {:>12.3e}", row.k, row.term_power, row.arcsine, row.error);
    }
    let pass = cmp.passes(a.odd_tolerance, a.even_tolerance);
    let _ = writeln!(
        stdout,
        "N = {}, K = {}: max odd relative error {:.3e} (tol {:e}), max even residual {:.3e} (tol {:e}), {:.3} s: {}",
        cmp.n,
        cmp.k_max,
        cmp.max_odd_rel_error,
        a.odd_tolerance,
        cmp.max_even_residual,
        a.even_tolerance,
        elapsed.as_secs_f64(),
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(CliError::Validation("weights disagree with the arcsine series".into()))
    }
}

#[derive(Serialize)]
struct OracleFile<'a> {
    command: &'static str,
    source: String,
    spectrum: String,
    drive_dbm: Option<f64>,
    resistance_ohm: f64,
    c: f64,
    n: usize,
    k_tail_tolerance: f64,
    n_tail_tolerance: f64,
    #[serde(flatten)]
    report: &'a OracleReport,
}

fn bin_dbm(density: f64, step: f64, r_ohm: f64) -> String {
    let w = density * step / r_ohm;
    if w > 0.0 {
        (10.0 * w.log10() + 30.0).to_string()
    } else {
        String::new()
    }
}

pub fn oracle(a: &OracleArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let (coeffs, device, source) = match &a.coeffs {
        Some(path) => {
            let coeffs = load_coeffs(path)?;
            let device = DeviceFunction::from_coefficients(&coeffs);
            (coeffs, device, path.display().to_string())
        }
        None => {
            let (coeffs, device) = model_device(&a.model, a.c, a.n)?;
            let label = device.label().to_string();
            (coeffs, device, label)
        }
    };
    if !device.is_real() {
        return Err(CliError::Input(format!(
            "{source}: coefficients describe a complex (AM-PM) device; the oracle supports zero-phase devices only"
        )));
    }
    let target = load_spectrum(&a.spectrum, None)?;
    let sigma = a.drive.sigma(a.resistance);
    let cfg = OracleConfig {
        seed: a.seed,
        n_samples: a.n_samples,
        n_segments: a.n_segments,
        beta: a.beta,
        saturation: if a.weights.strict { SaturationPolicy::Strict } else { SaturationPolicy::Clamp },
        ..OracleConfig::new(&target, sigma)?
    };
    let opts = a.weights.options();
    let run = run_oracle(&device, &coeffs, &cfg, &opts, None)?;
    warn(stderr, &run.report.warnings);

    let file = OracleFile {
        command: "oracle",
        source,
        spectrum: a.spectrum.display().to_string(),
        drive_dbm: a.drive.drive_dbm,
        resistance_ohm: a.resistance,
        c: coeffs.c,
        n: coeffs.n,
        k_tail_tolerance: opts.k_tail_tolerance,
        n_tail_tolerance: opts.n_tail_tolerance,
        report: &run.report,
    };
    let mut csv = String::from("freq_hz,predicted_dbm,oracle_dbm\n");
    let measured = resample(&run.estimate.spectrum, &run.predicted);
    let step = run.predicted.f_step_hz;
    for (i, m) in measured.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            run.predicted.frequency(i),
            bin_dbm(run.predicted.values[i], step, a.resistance),
            m.map(|v| bin_dbm(v, step, a.resistance)).unwrap_or_default()
        );
    }
    let report_path = write_json(&a.out.out, "oracle_report.json", &file)?;
    let psd_path = write_atomic(&a.out.out, "oracle_psd.csv", csv.as_bytes())?;
    let r = &run.report;
    let _ = writeln!(
        stdout,
        "SDR predicted {:.4} dB, oracle {:.4} dB (delta {:+.4} dB); in-band max |delta| {:.3} dB over {} bins",
        r.sdr_predicted_db, r.sdr_oracle_db, r.sdr_delta_db, r.max_delta_db, r.compared_bins
    );
    for p in [report_path, psd_path] {
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    Ok(())
}
