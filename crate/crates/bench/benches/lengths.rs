use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lowreg_bench::fixture;
use lowreg_core::{
    arc_length, distance, induced_length, metric_derivative, mollify_with_width, DistanceConfig,
    MetricDerivativeConfig, QuadratureConfig, RefinementConfig, SolverDistance,
};

fn lengths(c: &mut Criterion) {
    let (field, curve) = fixture("exp-conformal", "semicircle");
    c.bench_function("arc_length/exp/semicircle", |b| {
        b.iter(|| arc_length(&field, black_box(&curve), &QuadratureConfig::smooth()).unwrap())
    });
    let d = SolverDistance::new(&field, DistanceConfig::default());
    c.bench_function("induced_length/exp/semicircle/depth6", |b| {
        b.iter(|| induced_length(&d, black_box(&curve), &RefinementConfig::fixed_depth(6)).unwrap())
    });
    c.bench_function("metric_derivative/exp/semicircle", |b| {
        b.iter(|| metric_derivative(&d, black_box(&curve), 0.3, &MetricDerivativeConfig::default()).unwrap())
    });
}

fn solver(c: &mut Criterion) {
    let (field, _) = fixture("abs-conformal", "segment");
    let cfg = DistanceConfig::default();
    c.bench_function("distance/abs/long", |b| {
        b.iter(|| distance(&field, black_box(&[-1.5, -1.0]), &[1.5, 1.2], &cfg).unwrap())
    });
    c.bench_function("distance/abs/short", |b| {
        b.iter(|| distance(&field, black_box(&[0.1, 0.2]), &[0.101, 0.2005], &cfg).unwrap())
    });
}

fn mollify(c: &mut Criterion) {
    let (field, _) = fixture("abs-conformal", "segment");
    let mut group = c.benchmark_group("mollify");
    group.sample_size(10);
    group.bench_function("abs/grid32", |b| b.iter(|| mollify_with_width(&field, black_box(0.3), 32).unwrap()));
    group.finish();
}

criterion_group!(benches, lengths, solver, mollify);
criterion_main!(benches);
