//! Benchmark fixtures shared by the criterion targets.

use spinlab::{
    Boundary, Configuration, GibbsKernel, ManifoldKind, McmcParams, Observable, SiteManifold,
    SiteSet, SitePoint, Window,
};

/// Periodic 16-site Heisenberg chain with an MCMC kernel over the window.
pub fn chain_fixture(sweeps: usize) -> (GibbsKernel, Configuration) {
    let model = spinlab::load_model("heisenberg1d").expect("bundled model");
    let manifold = SiteManifold::new(ManifoldKind::Sphere2, 8).expect("manifold");
    let proto = Configuration::filled(
        Window::from_shape(&[16]).expect("window"),
        Boundary::Periodic,
        SitePoint::north(),
    );
    let lambda: SiteSet = proto.window().iter().collect();
    let params = McmcParams {
        sweeps,
        burn_in: sweeps / 2,
        chains: 1,
        ..Default::default()
    };
    let kernel =
        GibbsKernel::mcmc(model.potential, manifold, lambda, 1.0, params).expect("kernel");
    (kernel, proto)
}

/// Single-site field model with a quadrature kernel at the given order.
pub fn field_fixture(order: usize) -> (GibbsKernel, Configuration, Observable) {
    let model = spinlab::load_model("field").expect("bundled model");
    let manifold = SiteManifold::new(ManifoldKind::Sphere2, order).expect("manifold");
    let lambda: SiteSet = [spinlab::SiteIndex::d1(0)].into_iter().collect();
    let kernel = GibbsKernel::quadrature(model.potential, manifold, lambda, 1.0).expect("kernel");
    let eta = Configuration::filled(
        Window::from_shape(&[1]).expect("window"),
        Boundary::Free,
        SitePoint::north(),
    );
    let f = Observable::parse("sz(0)", ManifoldKind::Sphere2).expect("observable");
    (kernel, eta, f)
}
