//! Benchmarks for the hot paths: scoring, calibration, set construction,
//! and the two worst-case routes over the encoded set.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::DVector;
use std::hint::black_box;

use caus_bench::{bimodal_conditional, fixture_caus};
use caus_core::calibration::{calibrate, union_score};
use caus_core::sets::{encode_milp, maximize_encoded, worst_case_enumerate};
use caus_core::solver::HighsBackend;

fn bench_union_score(c: &mut Criterion) {
    let model = bimodal_conditional();
    let points = model.sample(1024, 7);
    c.bench_function("union_score_1024_points", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for p in &points {
                acc += union_score(black_box(&model), p).unwrap();
            }
            black_box(acc)
        })
    });
}

fn bench_calibrate(c: &mut Criterion) {
    let model = bimodal_conditional();
    c.bench_function("calibrate_ns_10000", |b| {
        b.iter(|| calibrate(black_box(&model), 10_000, 0.05, 11).unwrap())
    });
}

fn bench_build_and_encode(c: &mut Criterion) {
    c.bench_function("build_caus_t4", |b| b.iter(|| black_box(fixture_caus(4, 2_000))));
    let caus = fixture_caus(4, 2_000);
    c.bench_function("encode_milp_k2_t4", |b| {
        b.iter_batched(|| caus.union.clone(), |u| encode_milp(&u).unwrap(), BatchSize::SmallInput)
    });
}

fn bench_worst_case(c: &mut Criterion) {
    let backend = HighsBackend;
    let caus = fixture_caus(2, 2_000);
    let enc = encode_milp(&caus.union).unwrap();
    let objective = vec![DVector::from_vec(vec![-1.0, -1.0]); 2];
    c.bench_function("worst_case_milp_k2_t2", |b| {
        b.iter(|| maximize_encoded(black_box(&enc), &objective, &backend).unwrap())
    });
    c.bench_function("worst_case_enumeration_k2_t2", |b| {
        b.iter(|| worst_case_enumerate(black_box(&caus.union), &objective, &backend, None).unwrap())
    });
}

criterion_group!(benches, bench_union_score, bench_calibrate, bench_build_and_encode, bench_worst_case);
criterion_main!(benches);
