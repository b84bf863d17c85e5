use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinlab::{product_bracket, Boundary, Configuration, ManifoldKind, Observable, SiteManifold, Window};
use std::hint::black_box;

fn bench_quadrature(c: &mut Criterion) {
    c.bench_function("gauss_legendre_order_24", |b| {
        b.iter(|| spinlab::gauss_legendre(black_box(24)))
    });

    let m = SiteManifold::new(ManifoldKind::Sphere2, 24).unwrap();
    c.bench_function("sphere_quadrature_exp_sz_order_24", |b| {
        b.iter(|| {
            m.site_quadrature(|pt| match pt {
                spinlab::SitePoint::Sphere(s) => s[2].exp(),
                _ => unreachable!(),
            })
            .unwrap()
        })
    });

    let (kernel, eta, f) = spinlab_bench::field_fixture(24);
    c.bench_function("field_expectation_order_24", |b| {
        b.iter(|| kernel.expectation(black_box(&f), black_box(&eta)).unwrap())
    });
}

fn bench_observables(c: &mut Criterion) {
    let text = "-1.0*(sx(0)*sx(1)+sy(0)*sy(1)+sz(0)*sz(1))";
    c.bench_function("parse_bond_expression", |b| {
        b.iter(|| Observable::parse(black_box(text), ManifoldKind::Sphere2).unwrap())
    });

    let m = SiteManifold::new(ManifoldKind::Sphere2, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = Configuration::random(
        Window::from_shape(&[4]).unwrap(),
        Boundary::Free,
        &m,
        &mut rng,
    );
    let f = Observable::parse(text, ManifoldKind::Sphere2).unwrap();
    let g = Observable::parse("sz(0)*sy(1)", ManifoldKind::Sphere2).unwrap();
    c.bench_function("evaluate_bond_expression", |b| {
        b.iter(|| f.evaluate(black_box(&cfg)).unwrap())
    });
    c.bench_function("product_bracket_bond_pair", |b| {
        b.iter(|| product_bracket(black_box(&f), black_box(&g), black_box(&cfg)).unwrap())
    });
}

fn bench_sampler(c: &mut Criterion) {
    let dot = Observable::parse(
        "sx(0)*sx(1)+sy(0)*sy(1)+sz(0)*sz(1)",
        ManifoldKind::Sphere2,
    )
    .unwrap();
    c.bench_function("metropolis_2000_sweeps_chain16", |b| {
        let (kernel, proto) = spinlab_bench::chain_fixture(2_000);
        b.iter(|| kernel.expectation(black_box(&dot), black_box(&proto)).unwrap())
    });
}

criterion_group!(benches, bench_quadrature, bench_observables, bench_sampler);
criterion_main!(benches);
