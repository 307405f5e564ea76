use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tbma_core::{cloud_exponent, edge_exponent, presets, solve_all};

fn exponents(c: &mut Criterion) {
    let fig2 = presets::fig2_config(1.0);
    c.bench_function("edge_exponent_fig2", |b| {
        b.iter(|| edge_exponent(black_box(&fig2)).unwrap())
    });
    c.bench_function("cloud_exponent_fig2", |b| {
        b.iter(|| cloud_exponent(black_box(&fig2)).unwrap())
    });
    let fig3 = presets::fig3_config(4.0);
    c.bench_function("quantization_solve", |b| {
        b.iter(|| solve_all(black_box(&fig3)).unwrap())
    });
}

criterion_group!(benches, exponents);
criterion_main!(benches);
