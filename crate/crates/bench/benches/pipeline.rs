use std::hint::black_box;

use chfdist::chf::{compute_weights, WeightOptions};
use chfdist::nonlinearity::{analytic_model_samples, fourier_coefficients_from_samples, AnalyticModel};
use chfdist::spectrum::{autoconvolve, predict_output_spectrum, ConvMode};
use chfdist_bench::flat_band;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn coefficients(c: &mut Criterion) {
    let model = AnalyticModel::ScaledTanh { gain: 1.0, v_sat: 1.0 };
    let mut group = c.benchmark_group("fourier_coefficients");
    for n in [2001usize, 8001, 32001] {
        let ext = analytic_model_samples(model, 4.0, n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &ext, |b, ext| {
            b.iter(|| fourier_coefficients_from_samples(black_box(ext)))
        });
    }
    group.finish();
}

fn weights(c: &mut Criterion) {
    let ext = analytic_model_samples(AnalyticModel::Signum, 1.0, 8001).unwrap();
    let coeffs = fourier_coefficients_from_samples(&ext);
    let mut group = c.benchmark_group("compute_weights");
    for k in [9usize, 99] {
        let opts = WeightOptions { k_max: Some(k), ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(k), &opts, |b, opts| {
            b.iter(|| compute_weights(black_box(&coeffs), 0.1, 0.0, opts).unwrap())
        });
    }
    group.finish();
}

fn spectra(c: &mut Criterion) {
    let band = flat_band(1025, 257);
    let mut group = c.benchmark_group("autoconvolve");
    for mode in [ConvMode::Same, ConvMode::Full] {
        group.bench_with_input(BenchmarkId::new("k7", mode), &mode, |b, &mode| {
            b.iter(|| autoconvolve(black_box(&band), 7, mode).unwrap())
        });
    }
    group.finish();

    let ext = analytic_model_samples(AnalyticModel::Signum, 1.0, 8001).unwrap();
    let coeffs = fourier_coefficients_from_samples(&ext);
    let w = compute_weights(&coeffs, 0.1, 0.0, &WeightOptions { k_max: Some(99), ..Default::default() }).unwrap();
    c.bench_function("predict_same_k99", |b| {
        b.iter(|| predict_output_spectrum(black_box(&w), &band, ConvMode::Same).unwrap())
    });
}

criterion_group!(benches, coefficients, weights, spectra);
criterion_main!(benches);
