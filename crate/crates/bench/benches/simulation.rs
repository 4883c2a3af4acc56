use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sown_bench::{blue, optimal, LENGTH};
use sown_core::{simulate, SimConfig, TrafficModel};

fn bench_simulate(c: &mut Criterion) {
    let rate = blue();
    let (placement, q_sup) = optimal(10);
    let traffic = TrafficModel::from_load(0.9 * q_sup, 1e6, LENGTH).unwrap();
    let mut cfg = SimConfig::new(placement, traffic);
    cfg.horizon_s = 1e5 / traffic.packet_rate;
    cfg.warmup_s = 0.1 * cfg.horizon_s;

    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("n10_1e5_packets", |b| {
        b.iter(|| simulate(black_box(&cfg), &rate).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_simulate);
criterion_main!(benches);
