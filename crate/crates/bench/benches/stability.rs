//! Wall-clock benchmarks of the hot paths: dispersion evaluation,
//! principal-value integration, contour counting, certified root search,
//! and a short time-domain integration.

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use std::hint::black_box;
use vstab_core::dispersion::delta;
use vstab_core::evolution::{default_initial, evolve_mode, EvolveConfig};
use vstab_core::penrose::instability_index;
use vstab_core::roots::{default_root_region, find_roots, sufficient_radius, winding_number, ContourSpec};
use vstab_core::{build_profile, pv_cauchy, ProfileSpec};

fn bench_all(c: &mut Criterion) {
    let two_stream = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
    let maxwellian = build_profile(&ProfileSpec::maxwellian()).unwrap();

    c.bench_function("delta_interior_point", |b| {
        let lambda = Complex64::new(0.3, 0.7);
        b.iter(|| delta(black_box(&two_stream), black_box(0.5), black_box(lambda)).unwrap())
    });

    c.bench_function("pv_cauchy_at_valley", |b| {
        b.iter(|| pv_cauchy(black_box(&two_stream), black_box(0.0)).unwrap())
    });

    c.bench_function("instability_index_unstable_k", |b| {
        b.iter(|| instability_index(black_box(&two_stream), black_box(0.2)).unwrap())
    });

    c.bench_function("winding_semicircle_stable", |b| {
        let r = sufficient_radius(&maxwellian, 0.5).unwrap();
        let spec = ContourSpec::semicircle(r);
        b.iter(|| winding_number(black_box(&maxwellian), black_box(0.5), black_box(&spec)).unwrap())
    });

    let mut slow = c.benchmark_group("search_and_evolve");
    slow.sample_size(10);
    slow.bench_function("find_roots_two_stream", |b| {
        let region = default_root_region(&two_stream, 0.2).unwrap();
        b.iter(|| find_roots(black_box(&two_stream), black_box(0.2), black_box(&region)).unwrap())
    });
    slow.bench_function("evolve_short_run", |b| {
        let cfg = EvolveConfig {
            t_final: 2.0,
            dt: 0.02,
            n_v: 257,
        };
        b.iter(|| {
            evolve_mode(
                black_box(&two_stream),
                black_box(0.2),
                default_initial(),
                black_box(&cfg),
            )
            .unwrap()
        })
    });
    slow.finish();
}

criterion_group!(benches, bench_all);
criterion_main!(benches);
