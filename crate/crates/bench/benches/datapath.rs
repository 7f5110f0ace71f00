use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gnn_bench::{matrix, vector, xor};
use gnn_core::datapath::{mac_bank_matvec, outer_product, MacBankConfig};
use gnn_core::fxp::QFormat;
use gnn_core::lut::{build_lut, LutKind};
use gnn_core::network::{init_network, train_epoch, NetworkConfig};

const Q: QFormat = QFormat::Q2_14;

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("matvec_64x64");
    let w = matrix(64, 64, Q);
    let x = vector(64, Q);
    for b in [1, 16, 64] {
        let cfg = MacBankConfig::new(b, Q).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(b), &cfg, |bench, cfg| {
            bench.iter(|| mac_bank_matvec(cfg, black_box(&w), black_box(&x)).unwrap())
        });
    }
    group.finish();
}

fn outer(c: &mut Criterion) {
    let cfg = MacBankConfig::new(16, Q).unwrap();
    let d = vector(64, Q);
    let s = vector(64, Q);
    c.bench_function("outer_product_64x64", |b| {
        b.iter(|| outer_product(&cfg, black_box(&d), black_box(&s)).unwrap())
    });
}

fn lut_eval(c: &mut Criterion) {
    let t = build_lut(LutKind::Tanh, Q, -8.0, 8.0, 1024).unwrap();
    let xs = vector(1024, Q);
    c.bench_function("tanh_lut_1024_reads", |b| {
        b.iter(|| xs.iter().map(|&x| t.eval(black_box(x)).raw()).sum::<i64>())
    });
}

fn xor_epoch(c: &mut Criterion) {
    let cfg = NetworkConfig::new(2, vec![4], 2);
    let state = init_network(&cfg).unwrap();
    let data = xor(Q);
    c.bench_function("xor_train_epoch", |b| {
        b.iter(|| train_epoch(black_box(&state), &cfg, &data, 4).unwrap())
    });
}

criterion_group!(benches, matvec, outer, lut_eval, xor_epoch);
criterion_main!(benches);
