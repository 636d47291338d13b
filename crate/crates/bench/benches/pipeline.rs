//! Hot-path benchmarks: one representative workload per pipeline stage.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use axsnn_core::rng::keyed_u64;
use axsnn_core::{
    aqf_filter, frame_attack, pgd, quantize_network, rate_encode, synth_gesture, synth_images,
    AqfParams, AttackConfig, AttackKind, LifParams, Network, RasterSpec, SchemeKind,
};

/// A trained-size dense network and one encoded sample.
fn desk_network(time_steps: usize) -> (Network, axsnn_core::SpikeTensor) {
    let net = Network::random(&[64, 24, 2], LifParams::default(), time_steps, 11).unwrap();
    let img = &synth_images(1, 8, 8, 2, 12).unwrap()[0].0;
    let spikes = rate_encode(img, time_steps, 13).unwrap();
    (net, spikes)
}

fn bench_forward(c: &mut Criterion) {
    let (net, spikes) = desk_network(16);
    c.bench_function("forward_64x24x2_t16", |b| {
        b.iter(|| net.forward(black_box(&spikes)).unwrap())
    });
}

fn bench_filter(c: &mut Criterion) {
    // A gesture recording drowned in frame-injected noise, the workload the
    // filter exists for.
    let stream = synth_gesture(0, 2000, 17);
    let window = (0.0, stream.last_timestamp().unwrap() + 1.0);
    let attacked = frame_attack(&stream, &RasterSpec::new(8, window).unwrap()).unwrap();
    let params = AqfParams::default();
    c.bench_function("aqf_filter_noisy_gesture", |b| {
        b.iter(|| aqf_filter(black_box(&attacked), &params).unwrap())
    });
}

fn bench_pgd(c: &mut Criterion) {
    let net = Network::random(&[64, 24, 2], LifParams::default(), 16, 19).unwrap();
    let (img, label) = synth_images(1, 8, 8, 2, 23).unwrap().remove(0);
    let mut cfg = AttackConfig::new(AttackKind::Pgd, 0.5);
    cfg.seed = keyed_u64(29, 0, 0);
    c.bench_function("pgd_10_iterations", |b| {
        b.iter(|| pgd(black_box(&net), black_box(&img), label, &cfg).unwrap())
    });
}

fn bench_precision(c: &mut Criterion) {
    let net = Network::random(&[256, 128, 10], LifParams::default(), 16, 31).unwrap();
    c.bench_function("quantize_network_int8", |b| {
        b.iter(|| quantize_network(black_box(&net), SchemeKind::Int8).unwrap())
    });
}

criterion_group!(
    pipeline,
    bench_forward,
    bench_filter,
    bench_pgd,
    bench_precision
);
criterion_main!(pipeline);
