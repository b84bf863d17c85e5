//! Single-site phase spaces: the unit sphere S^2 and the flat torus T^2,
//! with normalized Liouville measure, uniform sampling and product
//! quadrature rules.
//!
//! Conventions (fixed once for the whole crate):
//! - Sphere bracket: {f,g}(s) = s . (grad f x grad g) with ambient gradients,
//!   so {sx,sy} = sz.
//! - Torus bracket: {f,g} = df/dq dg/dp - df/dp dg/dq.
//! - Sphere quadrature: Gauss-Legendre in u = cos(theta) tensored with an
//!   equispaced azimuthal rule of 2n points; exact for polynomials in
//!   (sx,sy,sz) of total degree <= 2n-1.
//! - Torus quadrature: equispaced n x n grid, spectrally accurate for
//!   trigonometric polynomials.

use crate::error::{Error, Result};
use crate::stats::Kahan;
use rand::Rng;
use std::f64::consts::PI;
use std::fmt;

pub const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    Sphere2,
    Torus2,
}

impl ManifoldKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "sphere2" => Ok(ManifoldKind::Sphere2),
            "torus2" => Ok(ManifoldKind::Torus2),
            other => Err(Error::InvalidArgument(format!(
                "unknown manifold `{other}` (expected `sphere2` or `torus2`)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldKind::Sphere2 => "sphere2",
            ManifoldKind::Torus2 => "torus2",
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A point of the single-site phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SitePoint {
    /// Unit vector (sx, sy, sz).
    Sphere([f64; 3]),
    /// Angle pair (q, p), both in [0, 2*pi).
    Torus { q: f64, p: f64 },
}

const UNIT_NORM_TOL: f64 = 1e-12;

impl SitePoint {
    /// Sphere point; the vector must already be unit within 1e-12.
    pub fn sphere(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "sphere point has norm {n}, not unit within {UNIT_NORM_TOL}"
            )));
        }
        Ok(SitePoint::Sphere(v))
    }

    /// Rescale an arbitrary non-zero vector onto the sphere.
    pub fn sphere_normalized(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument(
                "cannot normalize zero or non-finite vector".into(),
            ));
        }
        Ok(SitePoint::Sphere([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Torus point; angles are wrapped into [0, 2*pi).
    pub fn torus(q: f64, p: f64) -> Result<Self> {
        if !q.is_finite() || !p.is_finite() {
            return Err(Error::InvalidArgument("non-finite torus angle".into()));
        }
        Ok(SitePoint::Torus {
            q: q.rem_euclid(TWO_PI),
            p: p.rem_euclid(TWO_PI),
        })
    }

    pub fn north() -> Self {
        SitePoint::Sphere([0.0, 0.0, 1.0])
    }

    pub fn south() -> Self {
        SitePoint::Sphere([0.0, 0.0, -1.0])
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            SitePoint::Sphere(_) => ManifoldKind::Sphere2,
            SitePoint::Torus { .. } => ManifoldKind::Torus2,
        }
    }

    /// Coordinates as stored: 3 components for the sphere, 2 for the torus.
    pub fn coords_vec(&self) -> Vec<f64> {
        match self {
            SitePoint::Sphere(s) => s.to_vec(),
            SitePoint::Torus { q, p } => vec![*q, *p],
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th positive root.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (p2, d2) = legendre_with_derivative(n, z);
                dp = d2;
                z -= p2 / d2;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Legendre polynomial P_n(z) and its derivative by the three-term recurrence.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// A single-site manifold with its cached quadrature rule.
///
/// The node weights sum to 1, matching the normalized Liouville measure.
#[derive(Clone, Debug)]
pub struct SiteManifold {
    kind: ManifoldKind,
    quadrature_order: usize,
    nodes: Vec<(SitePoint, f64)>,
}

impl SiteManifold {
    pub fn new(kind: ManifoldKind, quadrature_order: usize) -> Result<Self> {
        if quadrature_order == 0 {
            return Err(Error::InvalidArgument(
                "quadrature_order must be positive".into(),
            ));
        }
        let nodes = match kind {
            ManifoldKind::Sphere2 => {
                let n = quadrature_order;
                let (u, wu) = gauss_legendre(n);
                let m = 2 * n;
                let mut nodes = Vec::with_capacity(n * m);
                for k in 0..n {
                    let r = (1.0 - u[k] * u[k]).max(0.0).sqrt();
                    let w = wu[k] / 2.0 / m as f64;
                    for j in 0..m {
                        let phi = TWO_PI * j as f64 / m as f64;
                        nodes.push((
                            SitePoint::Sphere([r * phi.cos(), r * phi.sin(), u[k]]),
                            w,
                        ));
                    }
                }
                nodes
            }
            ManifoldKind::Torus2 => {
                let n = quadrature_order;
                let w = 1.0 / (n * n) as f64;
                let mut nodes = Vec::with_capacity(n * n);
                for a in 0..n {
                    for b in 0..n {
                        nodes.push((
                            SitePoint::Torus {
                                q: TWO_PI * a as f64 / n as f64,
                                p: TWO_PI * b as f64 / n as f64,
                            },
                            w,
                        ));
                    }
                }
                nodes
            }
        };
        Ok(SiteManifold {
            kind,
            quadrature_order,
            nodes,
        })
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    /// Quadrature nodes with normalized weights.
    pub fn nodes(&self) -> &[(SitePoint, f64)] {
        &self.nodes
    }

    /// Draw a point from the normalized Liouville measure.
    pub fn uniform_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SitePoint {
        match self.kind {
            ManifoldKind::Sphere2 => {
                let u = 2.0 * rng.random::<f64>() - 1.0;
                let phi = TWO_PI * rng.random::<f64>();
                let r = (1.0 - u * u).max(0.0).sqrt();
                SitePoint::Sphere([r * phi.cos(), r * phi.sin(), u])
            }
            ManifoldKind::Torus2 => SitePoint::Torus {
                q: TWO_PI * rng.random::<f64>(),
                p: TWO_PI * rng.random::<f64>(),
            },
        }
    }

    /// Integrate a point function against the normalized Liouville measure.
    pub fn site_quadrature<F: FnMut(&SitePoint) -> f64>(&self, mut integrand: F) -> Result<f64> {
        let mut acc = Kahan::new();
        for (pt, w) in &self.nodes {
            let v = integrand(pt);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand {
                    node: format!("{pt:?}"),
                    value: v,
                });
            }
            acc.add(w * v);
        }
        Ok(acc.sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Liouville moment of a sphere monomial sx^a sy^b sz^c:
    /// zero if any exponent is odd, else (a-1)!!(b-1)!!(c-1)!!/(a+b+c+1)!!.
    fn sphere_monomial_moment(a: u32, b: u32, c: u32) -> f64 {
        fn double_fact(n: i64) -> f64 {
            let mut v = 1.0;
            let mut k = n;
            while k > 1 {
                v *= k as f64;
                k -= 2;
            }
            v
        }
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        double_fact(a as i64 - 1) * double_fact(b as i64 - 1) * double_fact(c as i64 - 1)
            / double_fact((a + b + c) as i64 + 1)
    }

    #[test]
    fn legendre_matches_reference_tables() {
        // Abramowitz & Stegun, n = 4.
        let (x, w) = gauss_legendre(4);
        let xr = [
            -0.8611363115940526,
            -0.3399810435848563,
            0.3399810435848563,
            0.8611363115940526,
        ];
        let wr = [
            0.3478548451374538,
            0.6521451548625461,
            0.6521451548625461,
            0.3478548451374538,
        ];
        for i in 0..4 {
            assert!((x[i] - xr[i]).abs() < 1e-14);
            assert!((w[i] - wr[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn total_measure_is_one() {
        for kind in [ManifoldKind::Sphere2, ManifoldKind::Torus2] {
            let m = SiteManifold::new(kind, 24).unwrap();
            let one = m.site_quadrature(|_| 1.0).unwrap();
            assert!((one - 1.0).abs() <= 1e-12, "{kind}: {one}");
        }
    }

    #[test]
    fn sphere_polynomial_exactness() {
        let order = 6; // exact through total degree 11
        let m = SiteManifold::new(ManifoldKind::Sphere2, order).unwrap();
        for a in 0..=4u32 {
            for b in 0..=4u32 {
                for c in 0..=3u32 {
                    if a + b + c > 2 * order as u32 - 1 {
                        continue;
                    }
                    let exact = sphere_monomial_moment(a, b, c);
                    let got = m
                        .site_quadrature(|pt| match pt {
                            SitePoint::Sphere(s) => {
                                s[0].powi(a as i32) * s[1].powi(b as i32) * s[2].powi(c as i32)
                            }
                            _ => unreachable!(),
                        })
                        .unwrap();
                    assert!(
                        (got - exact).abs() <= 1e-12 * (1.0 + exact.abs()),
                        "moment({a},{b},{c}): got {got}, exact {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn sphere_exponential_matches_1d_oracle() {
        // integral of e^{sz} over the sphere = integral of e^u du/2 = sinh(1).
        let m = SiteManifold::new(ManifoldKind::Sphere2, 24).unwrap();
        let got = m
            .site_quadrature(|pt| match pt {
                SitePoint::Sphere(s) => s[2].exp(),
                _ => unreachable!(),
            })
            .unwrap();
        let exact = 1.0f64.sinh(); // 1.1752011936438014
        assert!((got - exact).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn torus_trig_moments() {
        let m = SiteManifold::new(ManifoldKind::Torus2, 24).unwrap();
        let cos2 = m
            .site_quadrature(|pt| match pt {
                SitePoint::Torus { q, .. } => q.cos() * q.cos(),
                _ => unreachable!(),
            })
            .unwrap();
        assert!((cos2 - 0.5).abs() <= 1e-12);
        let cosq = m
            .site_quadrature(|pt| match pt {
                SitePoint::Torus { q, .. } => q.cos(),
                _ => unreachable!(),
            })
            .unwrap();
        assert!(cosq.abs() <= 1e-12);
    }

    #[test]
    fn uniform_sampler_moments() {
        let m = SiteManifold::new(ManifoldKind::Sphere2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let n = 1_000_000usize;
        let mut sum_z = Kahan::new();
        let mut sum_z2 = Kahan::new();
        for _ in 0..n {
            let pt = m.uniform_sample(&mut rng);
            if let SitePoint::Sphere(s) = pt {
                let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                assert!((norm - 1.0).abs() <= 1e-12);
                sum_z.add(s[2]);
                sum_z2.add(s[2] * s[2]);
            }
        }
        // <sz> = 0 with stderr = sqrt(1/3)/1000; <sz^2> = 1/3.
        let se_z = (1.0f64 / 3.0).sqrt() / (n as f64).sqrt();
        assert!(sum_z.sum().abs() / n as f64 <= 4.0 * se_z);
        let var_z2: f64 = 1.0 / 5.0 - 1.0 / 9.0;
        let se_z2 = var_z2.sqrt() / (n as f64).sqrt();
        assert!((sum_z2.sum() / n as f64 - 1.0 / 3.0).abs() <= 4.0 * se_z2);

        let t = SiteManifold::new(ManifoldKind::Torus2, 8).unwrap();
        let mut sum_cq = Kahan::new();
        for _ in 0..n {
            if let SitePoint::Torus { q, p } = t.uniform_sample(&mut rng) {
                assert!((0.0..TWO_PI).contains(&q) && (0.0..TWO_PI).contains(&p));
                sum_cq.add(q.cos());
            }
        }
        let se_cq = (0.5f64).sqrt() / (n as f64).sqrt();
        assert!(sum_cq.sum().abs() / n as f64 <= 4.0 * se_cq);
    }

    type Integrand = fn(&SitePoint) -> f64;

    #[test]
    fn sampler_and_quadrature_agree() {
        let m = SiteManifold::new(ManifoldKind::Sphere2, 16).unwrap();
        let integrands: Vec<(&str, Integrand)> = vec![
            ("sz^2", |pt| match pt {
                SitePoint::Sphere(s) => s[2] * s[2],
                _ => unreachable!(),
            }),
            ("exp(sx)", |pt| match pt {
                SitePoint::Sphere(s) => s[0].exp(),
                _ => unreachable!(),
            }),
            ("sx*sy + sz", |pt| match pt {
                SitePoint::Sphere(s) => s[0] * s[1] + s[2],
                _ => unreachable!(),
            }),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000usize;
        for (name, f) in integrands {
            let quad = m.site_quadrature(f).unwrap();
            let mut sum = Kahan::new();
            let mut sum_sq = Kahan::new();
            for _ in 0..n {
                let v = f(&m.uniform_sample(&mut rng));
                sum.add(v);
                sum_sq.add(v * v);
            }
            let mean = sum.sum() / n as f64;
            let var = (sum_sq.sum() - n as f64 * mean * mean) / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - quad).abs() <= 4.0 * se,
                "{name}: mc {mean} vs quad {quad} (se {se})"
            );
        }
    }
}
