//! Instrument CSV ingestion and power/voltage unit conversion.
//!
//! Two exports are understood: a VNA power sweep of the forward gain
//! (`p_in_dbm,s21_mag_db,s21_phase_deg`) and a spectrum-analyser trace
//! (`freq_hz,power_dbm`). Columns are located by header name, never by
//! position.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::TransferCurve;

pub const DEFAULT_LOAD_OHMS: f64 = 50.0;

/// Largest tolerated deviation of a single frequency gap from the mean spacing.
pub const GRID_TOLERANCE: f64 = 0.01;

/// One point of an S21 power sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VnaSweepRecord {
    pub p_in_dbm: f64,
    pub s21_mag_db: f64,
    pub s21_phase_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceUnit {
    DbmPerBin,
    LinearPower,
    UnitAreaDensity,
}

/// A uniformly gridded trace as exported by an instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub f_start_hz: f64,
    pub f_step_hz: f64,
    pub values: Vec<f64>,
    pub unit: TraceUnit,
    pub rbw_hz: Option<f64>,
}

impl SpectrumTrace {
    pub fn new(f_start_hz: f64, f_step_hz: f64, values: Vec<f64>, unit: TraceUnit) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "a spectrum trace needs at least 3 bins, got {}",
                values.len()
            )));
        }
        if !(f_step_hz > 0.0) || !f_step_hz.is_finite() || !f_start_hz.is_finite() {
            return Err(Error::Domain(format!("invalid frequency grid step {f_step_hz}")));
        }
        if unit == TraceUnit::UnitAreaDensity {
            let area: f64 = values.iter().sum::<f64>() * f_step_hz;
            if (area - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("unit-area trace integrates to {area}")));
            }
        }
        Ok(Self { f_start_hz, f_step_hz, values, unit, rbw_hz: None })
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
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(false).from_reader(text.as_bytes())
}

fn column_indices(headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column `{name}`") })
        })
        .collect()
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse { line, msg: err.to_string() }
}

fn field(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    let value: f64 = raw.parse().map_err(|_| Error::Parse { line, msg: format!("non-numeric {name} `{raw}`") })?;
    if !value.is_finite() {
        return Err(Error::Parse { line, msg: format!("non-finite {name} `{raw}`") });
    }
    Ok(value)
}

/// Reads rows of `(line, [values...])` for the requested columns.
fn numeric_rows(text: &str, columns: &[&str]) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx = column_indices(&headers, columns)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let values =
            idx.iter().zip(columns).map(|(&i, name)| field(&record, i, name, line)).collect::<Result<Vec<_>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

/// Parses VNA rows without the minimum-length check of [`parse_vna_csv`].
pub fn parse_vna_records(text: &str) -> Result<Vec<VnaSweepRecord>> {
    let rows = numeric_rows(text, &["p_in_dbm", "s21_mag_db", "s21_phase_deg"])?;
    let mut out: Vec<VnaSweepRecord> = Vec::with_capacity(rows.len());
    for (line, v) in rows {
        if let Some(prev) = out.last() {
            if v[0] <= prev.p_in_dbm {
                return Err(Error::Ordering(format!(
                    "line {line}: p_in_dbm {} does not increase past {}",
                    v[0], prev.p_in_dbm
                )));
            }
        }
        out.push(VnaSweepRecord { p_in_dbm: v[0], s21_mag_db: v[1], s21_phase_deg: v[2] });
    }
    Ok(out)
}

/// Parses a VNA power sweep. At least four records are required for interpolation.
pub fn parse_vna_csv(text: &str) -> Result<Vec<VnaSweepRecord>> {
    let records = parse_vna_records(text)?;
    if records.len() < 4 {
        return Err(Error::InsufficientData(format!("VNA sweep has {} records, need at least 4", records.len())));
    }
    Ok(records)
}

/// Parses a spectrum-analyser trace onto a uniform grid in dBm per bin.
pub fn parse_spectrum_csv(text: &str) -> Result<SpectrumTrace> {
    let rows = numeric_rows(text, &["freq_hz", "power_dbm"])?;
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!("spectrum trace has {} rows, need at least 3", rows.len())));
    }
    for pair in rows.windows(2) {
        if pair[1].1[0] <= pair[0].1[0] {
            return Err(Error::Ordering(format!(
                "line {}: frequency {} does not increase past {}",
                pair[1].0, pair[1].1[0], pair[0].1[0]
            )));
        }
    }
    let first = rows[0].1[0];
    let last = rows[rows.len() - 1].1[0];
    let step = (last - first) / (rows.len() - 1) as f64;
    let (worst_row, worst) = rows
        .windows(2)
        .map(|p| (p[1].0, ((p[1].1[0] - p[0].1[0]) - step).abs() / step))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if worst > GRID_TOLERANCE {
        return Err(Error::Grid { row: worst_row, deviation_pct: 100.0 * worst });
    }
    let values = rows.into_iter().map(|(_, v)| v[1]).collect();
    SpectrumTrace::new(first, step, values, TraceUnit::DbmPerBin)
}

/// Rescales a per-RBW power trace to per-bin power (`× f_step / rbw`).
pub fn apply_rbw_correction(trace: &SpectrumTrace, rbw_hz: f64) -> Result<SpectrumTrace> {
    if !(rbw_hz > 0.0) || !rbw_hz.is_finite() {
        return Err(Error::Domain(format!("resolution bandwidth must be positive, got {rbw_hz}")));
    }
    let ratio = trace.f_step_hz / rbw_hz;
    let values = match trace.unit {
        TraceUnit::DbmPerBin => trace.values.iter().map(|v| v + 10.0 * ratio.log10()).collect(),
        TraceUnit::LinearPower => trace.values.iter().map(|v| v * ratio).collect(),
        TraceUnit::UnitAreaDensity => {
            return Err(Error::Domain("RBW correction does not apply to a normalised density".into()))
        }
    };
    Ok(SpectrumTrace { values, rbw_hz: Some(rbw_hz), ..trace.clone() })
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// RMS voltage of a `p_dbm` signal into `r_ohm`.
pub fn dbm_to_rms_volts(p_dbm: f64, r_ohm: f64) -> f64 {
    (r_ohm * dbm_to_watts(p_dbm)).sqrt()
}

/// Peak voltage of a `p_dbm` sinusoid into `r_ohm`.
pub fn dbm_to_peak_volts(p_dbm: f64, r_ohm: f64) -> f64 {
    dbm_to_rms_volts(p_dbm, r_ohm) * SQRT_2
}

pub fn rms_volts_to_dbm(v_rms: f64, r_ohm: f64) -> f64 {
    20.0 * v_rms.log10() + 10.0 * (1000.0 / r_ohm).log10()
}

/// Converts an S21 sweep into a complex voltage transfer curve.
///
/// The abscissa is the peak input voltage of the swept tone; the curve starts
/// at the origin.
pub fn s21_to_transfer_curve(sweep: &[VnaSweepRecord], r_ohm: f64) -> Result<TransferCurve> {
    let mut points = Vec::with_capacity(sweep.len() + 1);
    points.push((0.0, Complex64::new(0.0, 0.0)));
    for rec in sweep {
        let v_in = dbm_to_peak_volts(rec.p_in_dbm, r_ohm);
        let gain = 10f64.powf(rec.s21_mag_db / 20.0);
        let v_out = Complex64::from_polar(v_in * gain, rec.s21_phase_deg.to_radians());
        points.push((v_in, v_out));
    }
    TransferCurve::new(points, r_ohm, "vna-s21-sweep")
}
