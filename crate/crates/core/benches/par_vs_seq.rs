//! Parallel vs sequential throughput on the two enumeration-heavy kernels:
//! brute-force policy enumeration and hull-radius member enumeration.
//!
//! Run with `cargo bench -p polyiter-core`; build with
//! `--no-default-features` to check the sequential-only configuration
//! (the parallel arms disappear).

use criterion::{criterion_group, criterion_main, Criterion};

use polyiter_core::game::DEFAULT_ENUM_CAP;
use polyiter_core::generate::{generate, FamilyKind, GeneratorSpec};
use polyiter_core::oracle;
use polyiter_core::perron::{self, family_from_instance};

fn bench_brute_force(c: &mut Criterion) {
    // seed 7 draws 5184 policy pairs, each one a 6x6 linear solve
    let inst = generate(&GeneratorSpec {
        n: 6,
        a_max: 3,
        b_max: 3,
        seed: 7,
        family: FamilyKind::SubstochasticCap { lambda: 0.9 },
    })
    .unwrap();
    let mut group = c.benchmark_group("brute_force_discounted");
    group.sample_size(10);
    group.bench_function("seq", |b| {
        b.iter(|| oracle::brute_force_discounted_seq(&inst, DEFAULT_ENUM_CAP).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("par", |b| {
        b.iter(|| oracle::brute_force_discounted_par(&inst, DEFAULT_ENUM_CAP).unwrap())
    });
    group.finish();
}

fn bench_hull_radius(c: &mut Criterion) {
    // seed 11 yields 2048 member matrices of size 8x8
    let inst = generate(&GeneratorSpec {
        n: 8,
        a_max: 2,
        b_max: 2,
        seed: 11,
        family: FamilyKind::StateDependentDiscount { rho_cap: 0.9 },
    })
    .unwrap();
    let family = family_from_instance(&inst);
    let count = family.member_count();
    let mut group = c.benchmark_group(format!("hull_radius_{count}_members"));
    group.sample_size(10);
    group.bench_function("seq", |b| {
        b.iter(|| perron::enumerate_radius_seq(&family, count).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("par", |b| {
        b.iter(|| perron::enumerate_radius_par(&family, count).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_brute_force, bench_hull_radius);
criterion_main!(benches);
