use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use skelmax::operators::{skeleton_maximal_at, skeleton_maximal_field, Backend};
use skelmax::selection::{greedy_select, overlap_report};
use skelmax_bench::{constant, extremizer_case, family, random_boxes};

fn field(c: &mut Criterion) {
    let mut g = c.benchmark_group("field");
    g.sample_size(10);
    for j in [4, 5, 6] {
        let delta = 2f64.powi(-j);
        let (cfg, f) = extremizer_case(delta);
        g.bench_with_input(BenchmarkId::new("extremizer", j), &delta, |b, _| {
            b.iter(|| skeleton_maximal_field(&cfg, black_box(&f)).unwrap())
        });
        let boxes = random_boxes(delta);
        g.bench_with_input(BenchmarkId::new("random-boxes", j), &delta, |b, _| {
            b.iter(|| skeleton_maximal_field(&cfg, black_box(&boxes)).unwrap())
        });
    }
    let (cfg, f) = extremizer_case(1.0 / 16.0);
    let quad = cfg.clone().with_backend(Backend::Quadrature { h: 1.0 / 64.0 }).unwrap();
    g.bench_function("extremizer-quadrature/4", |b| {
        b.iter(|| skeleton_maximal_field(&quad, black_box(&f)).unwrap())
    });
    g.finish();
}

fn point(c: &mut Criterion) {
    let (cfg, f) = extremizer_case(1.0 / 64.0);
    let x = [0.5 + 1.0 / 128.0, 0.5 + 1.0 / 128.0];
    c.bench_function("point/extremizer", |b| {
        b.iter(|| skeleton_maximal_at(black_box(&x), &cfg, &f).unwrap())
    });
    let one = constant(2);
    c.bench_function("point/constant", |b| {
        b.iter(|| skeleton_maximal_at(black_box(&x), &cfg, &one).unwrap())
    });
}

fn selection(c: &mut Criterion) {
    let mut g = c.benchmark_group("greedy");
    for m in [64, 512, 4096] {
        let fam = family(m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &fam, |b, fam| {
            b.iter(|| overlap_report(&greedy_select(black_box(fam))).max_coplanar)
        });
    }
    g.finish();
}

criterion_group!(benches, field, point, selection);
criterion_main!(benches);
