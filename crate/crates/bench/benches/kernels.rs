use std::hint::black_box;

use catlin_bench::{collar, domain};
use catlin_core::hyperbolicity::GSurrogate;
use catlin_core::metric::{catlin_metric, segment_length, DistanceEstimator, EstimatorConfig, QuadratureConfig};
use catlin_core::normalization::{pseudodistance, BoundaryChart};
use catlin_core::C2;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const DOMAINS: [&str; 3] = ["ball", "egg2", "egg3"];

fn charts(c: &mut Criterion) {
    let mut g = c.benchmark_group("chart_build");
    for name in DOMAINS {
        let dom = domain(name);
        let p = collar(&dom, 1)[0].point;
        g.bench_function(name, |b| b.iter(|| BoundaryChart::build(&dom, black_box(&p)).unwrap()));
    }
    g.finish();
}

fn pseudo(c: &mut Criterion) {
    let mut g = c.benchmark_group("pseudodistance");
    for name in DOMAINS {
        let dom = domain(name);
        let pts = collar(&dom, 2);
        // the chart cache is warm after the first call; this times d′
        g.bench_function(name, |b| b.iter(|| pseudodistance(&dom, black_box(&pts[0].point), &pts[1].point).unwrap()));
    }
    g.finish();
}

fn metric(c: &mut Criterion) {
    let mut g = c.benchmark_group("catlin_metric");
    let dir = C2::from_real([0.3, -0.2, 0.5, 0.1]);
    for name in DOMAINS {
        let dom = domain(name);
        let z = collar(&dom, 1)[0].point;
        g.bench_function(name, |b| b.iter(|| catlin_metric(&dom, black_box(&z), &dir).unwrap()));
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let dom = domain("egg2");
    let pts = collar(&dom, 2);
    let mut g = c.benchmark_group("segment_length");
    for (label, q) in [("trial", QuadratureConfig::trial()), ("accurate", QuadratureConfig::accurate())] {
        g.bench_function(label, |b| b.iter(|| segment_length(&dom, black_box(&pts[0].point), &pts[1].point, &q, 0).unwrap()));
    }
    g.finish();
}

fn estimator(c: &mut Criterion) {
    let dom = domain("egg2");
    let pts = collar(&dom, 2);
    let mut g = c.benchmark_group("distance_estimate");
    g.sample_size(10);
    for (label, cfg) in [("light", EstimatorConfig::light()), ("curves", EstimatorConfig::without_graph())] {
        g.bench_function(label, |b| {
            // a fresh estimator per run so the segment cache does not help
            b.iter(|| DistanceEstimator::new(&dom, cfg.clone()).estimate(&pts[0].point, &pts[1].point).unwrap())
        });
    }
    g.finish();
}

fn surrogate(c: &mut Criterion) {
    let dom = domain("egg2");
    let mut g = c.benchmark_group("g_surrogate_table");
    g.sample_size(10);
    for n in [16, 64] {
        let pool = collar(&dom, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pool, |b, pool| b.iter(|| GSurrogate::new(&dom, pool).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, charts, pseudo, metric, quadrature, estimator, surrogate);
criterion_main!(benches);
