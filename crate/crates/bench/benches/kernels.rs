use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use liplab::construct::{iterate_typical, BuildOptions};
use liplab::funclib::oscillation::dyadic_window;
use liplab::funclib::{make_test_function, scaled_osc_estimate, OscMode, TestFunction};
use liplab::partition::vitali_5r;
use liplab::setlib::{n_delta, DyadicCubeSet, IntervalSet, Scale, SetRepr};
use liplab::Gauge;
use liplab_bench::{balls, weierstrass};

fn counting(c: &mut Criterion) {
    let mut g = c.benchmark_group("n_delta");
    let cantor = SetRepr::Intervals(IntervalSet::cantor(12));
    g.bench_function("cantor_intervals_3^-12", |b| b.iter(|| n_delta(black_box(&cantor), &Scale::triadic(12))));
    for depth in [6u32, 8] {
        let full = SetRepr::Cubes(DyadicCubeSet::full(2, depth).unwrap());
        g.bench_with_input(BenchmarkId::new("full_square", depth), &full, |b, s| {
            b.iter(|| n_delta(black_box(s), &Scale::dyadic(depth - 2)))
        });
    }
    g.finish();
}

fn oscillation(c: &mut Criterion) {
    let mut g = c.benchmark_group("scaled_osc");
    let phi = Gauge::power(1.0).unwrap();
    for depth in [12u32, 16] {
        let f = weierstrass(depth);
        let w = dyadic_window(2, depth - 2);
        g.bench_with_input(BenchmarkId::new("weierstrass_Lip", depth), &f, |b, f| {
            b.iter(|| scaled_osc_estimate(f, black_box(&[0.377]), &phi, &w, OscMode::Upper))
        });
    }
    g.finish();
}

fn construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("construct");
    g.sample_size(10);
    let phi = Gauge::power(1.0).unwrap();
    let f = make_test_function(&TestFunction::Affine { c: 1.0 }, 1, 14).unwrap();
    g.bench_function("affine_three_stages", |b| {
        b.iter(|| iterate_typical(&f, 3, &phi, &phi, 1.0, &BuildOptions::default()).unwrap())
    });
    g.finish();
}

fn greedy(c: &mut Criterion) {
    let mut g = c.benchmark_group("vitali_5r");
    for n in [1_000usize, 10_000] {
        let cand = balls(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &cand, |b, cand| b.iter(|| vitali_5r(black_box(cand))));
    }
    g.finish();
}

criterion_group!(benches, counting, oscillation, construction, greedy);
criterion_main!(benches);
