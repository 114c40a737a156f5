use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use memfree::dft::dft_recursion;
use memfree::ensemble::{generate_design, generate_teacher};
use memfree::fwht::fwht_in_place;
use memfree::likelihood::LikelihoodModel;
use memfree::quadrature::QuadratureSpec;
use memfree::replica::{solve_replica, SolverOptions};
use memfree::spectral::{build_a, spectrum};
use memfree::DesignKind;

fn fwht(c: &mut Criterion) {
    let mut g = c.benchmark_group("fwht");
    for log_n in [10, 12, 14] {
        let n = 1usize << log_n;
        let mut v: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| fwht_in_place(black_box(&mut v))));
    }
    g.finish();
}

fn moments(c: &mut Criterion) {
    let model = LikelihoodModel::probit(1e-2).unwrap();
    let rhos: Vec<f64> = (0..1024).map(|i| -30.0 + 60.0 * i as f64 / 1023.0).collect();
    c.bench_function("probit_moments_1024", |b| {
        b.iter(|| {
            rhos.iter()
                .map(|&r| model.moments_unchecked(black_box(r), 1.0, 5.0).m)
                .sum::<f64>()
        })
    });
}

fn a_apply(c: &mut Criterion) {
    let mut g = c.benchmark_group("a_apply");
    g.sample_size(20);
    for kind in [DesignKind::Hadamard, DesignKind::Gaussian] {
        let (n, k) = if kind == DesignKind::Hadamard { (4096, 2048) } else { (1024, 512) };
        let design = generate_design(kind, n, k, 1).unwrap();
        let spec = Arc::new(spectrum(&design).unwrap());
        let a = build_a(spec, 0.1, 3.7).unwrap();
        let v: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        g.bench_function(format!("{}_{n}", kind.as_str()), |b| b.iter(|| a.apply(black_box(&v))));
    }
    g.finish();
}

fn replica_and_theory(c: &mut Criterion) {
    let design = generate_design(DesignKind::Hadamard, 4096, 2048, 1).unwrap();
    let spec = spectrum(&design).unwrap();
    let model = LikelihoodModel::probit(1e-2).unwrap();
    let quad = QuadratureSpec::new(61).unwrap();
    let mut g = c.benchmark_group("theory");
    g.sample_size(10);
    g.bench_function("replica_solve", |b| {
        b.iter(|| solve_replica(&spec, &model, &quad, &SolverOptions::default()).unwrap())
    });
    let sol = solve_replica(&spec, &model, &quad, &SolverOptions::default()).unwrap();
    let rule = quad.rule().unwrap();
    g.bench_function("dft_recursion_t8", |b| b.iter(|| dft_recursion(&sol, &model, &rule, 8).unwrap()));
    g.finish();

    // Keeps the teacher generator in the profile of instance setup costs.
    c.bench_function("teacher_4096", |b| b.iter(|| generate_teacher(design.clone(), 1e-2, 2).unwrap()));
}

criterion_group!(benches, fwht, moments, a_apply, replica_and_theory);
criterion_main!(benches);
