use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ive_core::sim::{generate_mixture, init_near_soi, make_side_info, TrialSpec};
use ive_core::{run_extraction, weighted_covariance, CovarianceSet, ExtractionConfig, Mode};
use std::hint::black_box;

fn spec(k: usize, n: usize) -> TrialSpec {
    TrialSpec {
        d: 5,
        k,
        n,
        seed: 7,
        ..TrialSpec::default()
    }
}

fn covariance(c: &mut Criterion) {
    let mut g = c.benchmark_group("covariance");
    for n in [200, 1000, 5000] {
        let (x, truth) = generate_mixture(&spec(1, n)).unwrap();
        let side = make_side_info(&truth.s_true, 0.5, 1).unwrap();
        let w = side.weights(0);
        g.bench_with_input(BenchmarkId::new("weighted", n), &n, |b, _| {
            b.iter(|| weighted_covariance(black_box(x.mixture(0)), black_box(&w)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("set", n), &n, |b, _| {
            b.iter(|| CovarianceSet::estimate(black_box(&x), Some(&side)).unwrap())
        });
    }
    g.finish();
}

fn extraction(c: &mut Criterion) {
    let mut g = c.benchmark_group("extraction");
    for (k, mode) in [
        (1, Mode::Blind),
        (1, Mode::Informed),
        (10, Mode::Blind),
        (10, Mode::Informed),
    ] {
        let (x, truth) = generate_mixture(&spec(k, 200)).unwrap();
        let side = make_side_info(&truth.s_true, 0.5, 1).unwrap();
        let init = init_near_soi(&truth.a_true, 0.5, 2).unwrap();
        let cfg = ExtractionConfig {
            mode,
            max_iters: 20,
            conv_tol: 1e-300,
            ..ExtractionConfig::default()
        };
        let side = (mode == Mode::Informed).then_some(&side);
        let id = BenchmarkId::new(format!("{mode:?}").to_lowercase(), k);
        g.bench_with_input(id, &k, |b, _| {
            b.iter(|| run_extraction(black_box(&x), side, &cfg, Some(&init)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, covariance, extraction);
criterion_main!(benches);
