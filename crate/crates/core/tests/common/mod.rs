//! Shared test oracles, independent of the library's computation paths.

#![allow(dead_code)]

use rand::Rng;
use spinlab::{Boundary, Configuration, ManifoldKind, SiteIndex, SiteManifold, SitePoint, Window};

/// Langevin function: the single-site magnetization of a classical spin in
/// a field, L(h) = coth(h) - 1/h.
pub fn langevin(h: f64) -> f64 {
    1.0 / h.tanh() - 1.0 / h
}

/// Composite Simpson rule on [-1, 1].
pub fn simpson<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let n = n + n % 2;
    let h = 2.0 / n as f64;
    let mut s = f(-1.0) + f(1.0);
    for i in 1..n {
        let x = -1.0 + i as f64 * h;
        s += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Modified Bessel function of the first kind by its power series.
pub fn bessel_i(nu: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(nu as i32);
    for k in 1..=nu {
        term /= k as f64;
    }
    let mut sum = term;
    for k in 1..60 {
        term *= half * half / (k as f64 * (k + nu) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn mat_trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// Transfer-operator estimate of the nearest-neighbor correlation
/// <s_0 . s_1> of the periodic classical Heisenberg chain, computed in the
/// azimuthally symmetric sector with a Gauss-Legendre Nystrom
/// discretization. The neglected sectors contribute at relative order
/// (I1/I0)^N, far below the tolerances it is used at.
pub fn transfer_matrix_chain_correlation(j_coupling: f64, n_sites: usize, order: usize) -> f64 {
    let (u, w) = spinlab::gauss_legendre(order);
    let n = order;
    let mut m = vec![0.0; n * n];
    let mut m1 = vec![0.0; n * n];
    for a in 0..n {
        let ra = (1.0 - u[a] * u[a]).max(0.0).sqrt();
        for b in 0..n {
            let rb = (1.0 - u[b] * u[b]).max(0.0).sqrt();
            let scale = (w[a] / 2.0).sqrt() * (w[b] / 2.0).sqrt();
            let e = (j_coupling * u[a] * u[b]).exp();
            let i0 = bessel_i(0, j_coupling * ra * rb);
            let i1 = bessel_i(1, j_coupling * ra * rb);
            m[a * n + b] = scale * e * i0;
            m1[a * n + b] = scale * e * (u[a] * u[b] * i0 + ra * rb * i1);
        }
    }
    // tr(M1 * M^{N-1}) / tr(M^N)
    let mut power = m.clone();
    for _ in 0..n_sites - 2 {
        power = mat_mul(&power, &m, n);
    }
    let num = mat_trace(&mat_mul(&m1, &power, n), n);
    let den = mat_trace(&mat_mul(&m, &power, n), n);
    num / den
}

/// Uniform random sphere configuration over a 1-D window.
pub fn random_sphere_chain<R: Rng>(
    lo: i64,
    len: usize,
    boundary: Boundary,
    rng: &mut R,
) -> Configuration {
    let m = SiteManifold::new(ManifoldKind::Sphere2, 4).unwrap();
    let w = Window::new(SiteIndex::d1(lo), &[len]).unwrap();
    Configuration::random(w, boundary, &m, rng)
}

/// Uniform random torus configuration over a 1-D window.
pub fn random_torus_chain<R: Rng>(
    lo: i64,
    len: usize,
    boundary: Boundary,
    rng: &mut R,
) -> Configuration {
    let m = SiteManifold::new(ManifoldKind::Torus2, 4).unwrap();
    let w = Window::new(SiteIndex::d1(lo), &[len]).unwrap();
    Configuration::random(w, boundary, &m, rng)
}

/// Equatorial point: sz = 0.
pub fn equator() -> SitePoint {
    SitePoint::sphere([1.0, 0.0, 0.0]).unwrap()
}

// ---------------------------------------------------------------------------
// Algebraic-layer helpers shared by the property and acceptance suites.
// ---------------------------------------------------------------------------

use rand_chacha::ChaCha8Rng;
use spinlab::{bracket_observable, product_bracket, Expr, Observable};

pub const SPHERE_EXPRS: &[&str] = &[
    "sz(0)",
    "sx(0)*sy(0)",
    "sz(0)^2",
    "sx(0)*sx(1)+sy(0)*sy(1)+sz(0)*sz(1)",
    "exp(sz(0))",
    "cos(sx(0))",
    "sin(sy(0))*sz(0)",
    "sx(0)^3 - 2*sz(0)",
    "exp(sx(0)*sy(1))",
    "sz(0)*sz(1)^2",
    "(sx(0)+sy(0))^2",
    "cos(sz(0)*sz(1))",
    "sx(0)*sy(0)*sz(0)",
    "1.5*sz(0) - sx(1)",
    "sin(sx(0))*cos(sy(1))",
    "exp(2*sz(0))",
];

pub const TORUS_EXPRS: &[&str] = &[
    "cos(q(0))",
    "sin(p(0))*cos(q(0))",
    "cos(q(0))*cos(q(1))+sin(q(0))*sin(q(1))",
    "exp(cos(q(0)))*sin(p(1))",
    "cos(q(0))^3",
    "sin(p(0))^2*cos(p(1))",
];

pub fn parse_all(texts: &[&str], kind: ManifoldKind) -> Vec<Observable> {
    texts
        .iter()
        .map(|t| Observable::parse(t, kind).unwrap())
        .collect()
}

pub fn random_config(kind: ManifoldKind, rng: &mut ChaCha8Rng) -> Configuration {
    match kind {
        ManifoldKind::Sphere2 => random_sphere_chain(-1, 4, Boundary::Free, rng),
        ManifoldKind::Torus2 => random_torus_chain(-1, 4, Boundary::Free, rng),
    }
}

/// Max scaled antisymmetry violation of {f,g} + {g,f} over both corpora.
pub fn antisymmetry_max_violation(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for kind in [ManifoldKind::Sphere2, ManifoldKind::Torus2] {
        let exprs = parse_all(
            if kind == ManifoldKind::Sphere2 {
                SPHERE_EXPRS
            } else {
                TORUS_EXPRS
            },
            kind,
        );
        for f in &exprs {
            for g in &exprs {
                let cfg = random_config(kind, rng);
                let fg = product_bracket(f, g, &cfg).unwrap();
                let gf = product_bracket(g, f, &cfg).unwrap();
                worst = worst.max((fg + gf).abs() / (1.0 + fg.abs()));
            }
        }
    }
    worst
}

/// Max scaled Leibniz violation of {f*h, g} = f{h,g} + h{f,g}.
pub fn leibniz_max_violation(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for kind in [ManifoldKind::Sphere2, ManifoldKind::Torus2] {
        let exprs = parse_all(
            if kind == ManifoldKind::Sphere2 {
                SPHERE_EXPRS
            } else {
                TORUS_EXPRS
            },
            kind,
        );
        for w in exprs.windows(3) {
            let (f, h, g) = (&w[0], &w[1], &w[2]);
            let fh = Observable::from_expr(
                Expr::Mul(f.expr().clone().into(), h.expr().clone().into()),
                kind,
            );
            for _ in 0..4 {
                let cfg = random_config(kind, rng);
                let lhs = product_bracket(&fh, g, &cfg).unwrap();
                let rhs = f.evaluate(&cfg).unwrap() * product_bracket(h, g, &cfg).unwrap()
                    + h.evaluate(&cfg).unwrap() * product_bracket(f, g, &cfg).unwrap();
                worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())));
            }
        }
    }
    worst
}

/// Random polynomial of total degree <= 3 over one or two sphere sites.
pub fn random_cubic(rng: &mut ChaCha8Rng, two_sites: bool) -> Observable {
    use rand::Rng;
    let syms = ["sx", "sy", "sz"];
    let mut terms: Vec<String> = Vec::new();
    for _ in 0..4 {
        let coeff = rng.random_range(-1.0..1.0);
        let degree = rng.random_range(1..=3u32);
        let mut factors = Vec::new();
        for _ in 0..degree {
            let s = syms[rng.random_range(0..3)];
            let site = if two_sites { rng.random_range(0..2) } else { 0 };
            factors.push(format!("{s}({site})"));
        }
        terms.push(format!("{coeff}*{}", factors.join("*")));
    }
    Observable::parse(&terms.join(" + "), ManifoldKind::Sphere2).unwrap()
}

/// Max scaled Jacobi violation over random cubic triples.
pub fn jacobi_max_violation(rng: &mut ChaCha8Rng, trials: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let two = trial % 2 == 0;
        let f = random_cubic(rng, two);
        let g = random_cubic(rng, two);
        let h = random_cubic(rng, two);
        let j1 = bracket_observable(&bracket_observable(&f, &g).unwrap(), &h).unwrap();
        let j2 = bracket_observable(&bracket_observable(&f, &h).unwrap(), &g).unwrap();
        let j3 = bracket_observable(&f, &bracket_observable(&g, &h).unwrap()).unwrap();
        for _ in 0..4 {
            let cfg = random_config(ManifoldKind::Sphere2, rng);
            let a = j1.evaluate(&cfg).unwrap();
            let b = j2.evaluate(&cfg).unwrap();
            let c = j3.evaluate(&cfg).unwrap();
            let scale = 1.0f64.max(a.abs()).max(b.abs()).max(c.abs());
            worst = worst.max((a - b - c).abs() / scale);
        }
    }
    worst
}

/// AD-vs-central-difference gradient check over both corpora; returns the
/// number of expressions checked and the worst relative error. Sphere
/// gradients are compared along tangent directions after tangential
/// projection.
pub fn fd_gradient_check(rng: &mut ChaCha8Rng) -> (usize, f64) {
    let h = 1e-5;
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;

    let tangential = |g: [f64; 3], s: [f64; 3]| {
        let dot = g[0] * s[0] + g[1] * s[1] + g[2] * s[2];
        [g[0] - dot * s[0], g[1] - dot * s[1], g[2] - dot * s[2]]
    };
    let frame = |s: [f64; 3]| {
        let a = if s[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let mut e1 = [
            s[1] * a[2] - s[2] * a[1],
            s[2] * a[0] - s[0] * a[2],
            s[0] * a[1] - s[1] * a[0],
        ];
        let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
        let e2 = [
            s[1] * e1[2] - s[2] * e1[1],
            s[2] * e1[0] - s[0] * e1[2],
            s[0] * e1[1] - s[1] * e1[0],
        ];
        (e1, e2)
    };

    for text in SPHERE_EXPRS {
        let f = Observable::parse(text, ManifoldKind::Sphere2).unwrap();
        for _ in 0..3 {
            let cfg = random_config(ManifoldKind::Sphere2, rng);
            for site in f.support().clone() {
                let s = match cfg.get(site).unwrap() {
                    SitePoint::Sphere(s) => s,
                    _ => unreachable!(),
                };
                let gt = tangential(f.grad_site(&cfg, site).unwrap(), s);
                let (e1, e2) = frame(s);
                let mut ad = [0.0; 2];
                let mut fd = [0.0; 2];
                for (k, t) in [e1, e2].into_iter().enumerate() {
                    ad[k] = gt[0] * t[0] + gt[1] * t[1] + gt[2] * t[2];
                    let step = |sgn: f64| {
                        let v = [
                            s[0] + sgn * h * t[0],
                            s[1] + sgn * h * t[1],
                            s[2] + sgn * h * t[2],
                        ];
                        let mut c2 = cfg.clone();
                        c2.set(site, SitePoint::sphere_normalized(v).unwrap()).unwrap();
                        f.evaluate(&c2).unwrap()
                    };
                    fd[k] = (step(1.0) - step(-1.0)) / (2.0 * h);
                }
                let diff = ((ad[0] - fd[0]).powi(2) + (ad[1] - fd[1]).powi(2)).sqrt();
                let scale = (ad[0] * ad[0] + ad[1] * ad[1]).sqrt().max(0.1);
                worst = worst.max(diff / scale);
            }
        }
        checked += 1;
    }

    for text in TORUS_EXPRS {
        let f = Observable::parse(text, ManifoldKind::Torus2).unwrap();
        for _ in 0..3 {
            let cfg = random_config(ManifoldKind::Torus2, rng);
            for site in f.support().clone() {
                let (q, p) = match cfg.get(site).unwrap() {
                    SitePoint::Torus { q, p } => (q, p),
                    _ => unreachable!(),
                };
                let grad = f.grad_site(&cfg, site).unwrap();
                let eval_at = |q2: f64, p2: f64| {
                    let mut c2 = cfg.clone();
                    c2.set(site, SitePoint::torus(q2, p2).unwrap()).unwrap();
                    f.evaluate(&c2).unwrap()
                };
                let fd_q = (eval_at(q + h, p) - eval_at(q - h, p)) / (2.0 * h);
                let fd_p = (eval_at(q, p + h) - eval_at(q, p - h)) / (2.0 * h);
                let diff = ((grad[0] - fd_q).powi(2) + (grad[1] - fd_p).powi(2)).sqrt();
                let scale = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt().max(0.1);
                worst = worst.max(diff / scale);
            }
        }
        checked += 1;
    }
    (checked, worst)
}
