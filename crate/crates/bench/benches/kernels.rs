use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wsq_bench::{hermitian, instance};
use wsq_core::harness::Flavor;
use wsq_core::linalg::{self, EIG_TOL};
use wsq_core::minimality::{self, BetaMode};
use wsq_core::petz::{self, PetzInstance, PetzOptions};
use wsq_core::sufficiency;
use wsq_core::Tolerances;

fn eigensolver(c: &mut Criterion) {
    let mut group = c.benchmark_group("hermitian_eig");
    for d in [4, 8, 16, 32] {
        let h = hermitian(d, 1);
        group.bench_with_input(BenchmarkId::from_parameter(d), &h, |b, h| {
            b.iter(|| linalg::hermitian_eig(black_box(h), EIG_TOL).unwrap())
        });
    }
    group.finish();
}

fn checker(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("check_weak_sufficiency");
    for d in [4, 8, 16] {
        let (t, f) = instance(
            Flavor::ClassPlanted {
                classes: 2,
                dead_atoms: 0,
            },
            d,
            4,
            2,
        );
        group.bench_with_input(BenchmarkId::from_parameter(d), &(t, f), |b, (t, f)| {
            b.iter(|| {
                sufficiency::check_weak_sufficiency(black_box(t), black_box(f), &tol).unwrap()
            })
        });
    }
    group.finish();

    let (_, f) = instance(Flavor::RealVectors, 8, 5, 3);
    c.bench_function("exists_weakly_sufficient/8x5", |b| {
        b.iter(|| sufficiency::exists_weakly_sufficient(black_box(&f), &tol).unwrap())
    });

    let (t, f) = instance(
        Flavor::ClassPlanted {
            classes: 3,
            dead_atoms: 0,
        },
        7,
        4,
        4,
    );
    c.bench_function("minimal_statistic/7", |b| {
        b.iter(|| {
            minimality::minimal_statistic(black_box(&t), black_box(&f), &tol, BetaMode::Complex)
                .unwrap()
        })
    });
}

fn petz_solver(c: &mut Criterion) {
    let opts = PetzOptions::default();
    let mut group = c.benchmark_group("petz_feasibility");
    group.sample_size(20);
    for d in [2, 4, 6] {
        let (t, f) = instance(Flavor::AtomPlanted, d, 2, 5);
        let inst = PetzInstance::new(t, f, true).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &inst, |b, inst| {
            b.iter(|| petz::petz_feasibility(black_box(inst), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigensolver, checker, petz_solver);
criterion_main!(benches);
