//! Benchmark fixtures for the distortion-prediction pipeline. See `benches/pipeline.rs`.

use chfdist::spectrum::{Spectrum, SpectrumUnit};

/// Flat unit-area band of `occupied` bins centred in a `len`-bin grid with unit bin spacing.
pub fn flat_band(len: usize, occupied: usize) -> Spectrum {
    let centre = len / 2;
    let half = occupied / 2;
    let values = (0..len).map(|i| if i.abs_diff(centre) <= half { 1.0 } else { 0.0 }).collect();
    Spectrum::new(-(centre as f64), 1.0, values, SpectrumUnit::LinearPower)
        .and_then(|s| chfdist::spectrum::normalize_to_unit_area(&s))
        .expect("valid flat band")
}
