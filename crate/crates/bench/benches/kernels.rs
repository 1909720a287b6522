use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fogsense::dsp::{kmeans, median_filter, morlet_band_power, Band};
use fogsense::evaluate::{causal_epochs, EPOCH_OVERLAP, EPOCH_WINDOW_S};
use fogsense::pipeline::{extract_features, to_common_rate, FeatureParams};
use fogsense_bench::{short_subject, tone_mix};

fn kernels(c: &mut Criterion) {
    let x = tone_mix(10.24, 500.0);
    c.bench_function("morlet_band_power 10 s, 20 freqs", |b| {
        b.iter(|| morlet_band_power(black_box(&x), 500.0, Band { lo_hz: 3.0, hi_hz: 8.0 }, 20, 7.0).unwrap())
    });
    c.bench_function("median_filter 10 s, 30 ms", |b| b.iter(|| median_filter(black_box(&x), 500.0, 30.0)));
    let points: Vec<Vec<f64>> = x.windows(2).map(|w| vec![w[0], w[1] - w[0]]).collect();
    c.bench_function("kmeans k=2, 5k points", |b| b.iter(|| kmeans(black_box(&points), 2, 7).unwrap()));
}

fn pipeline(c: &mut Criterion) {
    let s = short_subject();
    let params = FeatureParams::default();
    let mut g = c.benchmark_group("one-minute subject");
    g.sample_size(10);
    g.bench_function("offline features", |b| {
        b.iter(|| extract_features(&to_common_rate(&s.recording).unwrap(), &s.switches, &params).unwrap())
    });
    g.bench_function("causal epochs", |b| {
        b.iter(|| causal_epochs(&s.recording, &s.switches, &params, EPOCH_WINDOW_S, EPOCH_OVERLAP).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kernels, pipeline);
criterion_main!(benches);
