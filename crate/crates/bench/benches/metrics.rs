use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use screeval_bench::observations;
use screeval_core::metrics::{auroc_of, bootstrap_ci, confusion_at_threshold, BootstrapConfig, Metric, DEFAULT_THRESHOLD};

fn auroc(c: &mut Criterion) {
    let mut g = c.benchmark_group("auroc");
    for n in [1_000, 10_000, 163_344] {
        let obs = observations(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &obs, |b, obs| {
            b.iter(|| auroc_of(obs).unwrap())
        });
    }
    g.finish();
}

fn confusion(c: &mut Criterion) {
    let obs = observations(163_344, 2);
    c.bench_function("confusion/163344", |b| {
        b.iter(|| confusion_at_threshold(&obs, DEFAULT_THRESHOLD).unwrap())
    });
}

fn bootstrap(c: &mut Criterion) {
    let mut g = c.benchmark_group("bootstrap_auroc_200");
    g.sample_size(10);
    let cfg = BootstrapConfig {
        n_resamples: 200,
        ..Default::default()
    };
    for n in [10_000, 50_000] {
        let obs = observations(n, 3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &obs, |b, obs| {
            b.iter(|| bootstrap_ci(Metric::Auroc, obs, DEFAULT_THRESHOLD, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, auroc, confusion, bootstrap);
criterion_main!(benches);
