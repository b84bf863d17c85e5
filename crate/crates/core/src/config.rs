//! Finite-window spin configurations with boundary conditions.

use crate::error::{Error, Result};
use crate::lattice::{SiteIndex, SiteSet, Window};
use crate::manifold::{ManifoldKind, SiteManifold, SitePoint};
use crate::observable::CoordSym;
use rand::Rng;
use std::collections::BTreeMap;

/// How sites outside the window are resolved.
///
/// - `Fixed` supplies explicit boundary values on a finite collar.
/// - `Periodic` wraps coordinates modulo the window lengths.
/// - `Free` makes any access outside the window an error; observables whose
///   support exits the window cannot be evaluated.
#[derive(Clone, Debug)]
pub enum Boundary {
    Fixed(BTreeMap<SiteIndex, SitePoint>),
    Periodic,
    Free,
}

/// A spin assignment on a finite window plus its boundary condition.
#[derive(Clone, Debug)]
pub struct Configuration {
    window: Window,
    values: Vec<SitePoint>,
    boundary: Boundary,
}

impl Configuration {
    /// Every window site set to `fill`.
    pub fn filled(window: Window, boundary: Boundary, fill: SitePoint) -> Self {
        let n = window.volume();
        Configuration {
            window,
            values: vec![fill; n],
            boundary,
        }
    }

    /// Window sites drawn independently from the Liouville measure.
    pub fn random<R: Rng + ?Sized>(
        window: Window,
        boundary: Boundary,
        manifold: &SiteManifold,
        rng: &mut R,
    ) -> Self {
        let values = (0..window.volume())
            .map(|_| manifold.uniform_sample(rng))
            .collect();
        Configuration {
            window,
            values,
            boundary,
        }
    }

    /// A window of `fill` values with a fixed collar of `collar_width` sites
    /// around it, all set to `collar_value`.
    pub fn with_uniform_collar(
        window: Window,
        collar_width: i64,
        fill: SitePoint,
        collar_value: SitePoint,
    ) -> Self {
        let mut collar = BTreeMap::new();
        if collar_width > 0 {
            for site in window.expanded(collar_width).iter() {
                if !window.contains(site) {
                    collar.insert(site, collar_value);
                }
            }
        }
        Configuration::filled(window, Boundary::Fixed(collar), fill)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn manifold_kind(&self) -> ManifoldKind {
        self.values[0].kind()
    }

    /// Resolve a site to a point, honoring the boundary condition.
    pub fn get(&self, site: SiteIndex) -> Result<SitePoint> {
        if self.window.contains(site) {
            return Ok(self.values[self.window.flat(site)]);
        }
        match &self.boundary {
            Boundary::Periodic => {
                let wrapped = self.window.wrap(site);
                Ok(self.values[self.window.flat(wrapped)])
            }
            Boundary::Fixed(collar) => collar
                .get(&site)
                .copied()
                .ok_or(Error::MissingSite { site }),
            Boundary::Free => Err(Error::MissingSite { site }),
        }
    }

    /// One coordinate of the point at a site.
    pub fn coord(&self, site: SiteIndex, sym: CoordSym) -> Result<f64> {
        match (self.get(site)?, sym) {
            (SitePoint::Sphere(s), CoordSym::Sx) => Ok(s[0]),
            (SitePoint::Sphere(s), CoordSym::Sy) => Ok(s[1]),
            (SitePoint::Sphere(s), CoordSym::Sz) => Ok(s[2]),
            (SitePoint::Torus { q, .. }, CoordSym::Q) => Ok(q),
            (SitePoint::Torus { p, .. }, CoordSym::P) => Ok(p),
            (pt, sym) => Err(Error::InvalidObservable(format!(
                "symbol `{}` does not exist on {}",
                sym.name(),
                pt.kind()
            ))),
        }
    }

    /// Overwrite a window site (periodic windows accept wrapped sites).
    pub fn set(&mut self, site: SiteIndex, point: SitePoint) -> Result<()> {
        let site = if self.window.contains(site) {
            site
        } else if matches!(self.boundary, Boundary::Periodic) {
            self.window.wrap(site)
        } else {
            return Err(Error::MissingSite { site });
        };
        let idx = self.window.flat(site);
        self.values[idx] = point;
        Ok(())
    }

    /// True when every listed site can be resolved.
    pub fn covers(&self, sites: &SiteSet) -> bool {
        sites.iter().all(|s| self.get(*s).is_ok())
    }

    /// Cyclically shift all window values by `shift` (periodic windows only).
    pub fn cyclic_shift(&self, shift: SiteIndex) -> Result<Configuration> {
        if !matches!(self.boundary, Boundary::Periodic) {
            return Err(Error::InvalidConfiguration(
                "cyclic shift needs a periodic window".into(),
            ));
        }
        let mut out = self.clone();
        for site in self.window.iter() {
            let src = self.window.wrap(site.minus(shift));
            out.values[self.window.flat(site)] = self.values[self.window.flat(src)];
        }
        Ok(out)
    }

    /// JSON value mapping "i" or "i,j" keys to coordinate arrays.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for site in self.window.iter() {
            let pt = self.values[self.window.flat(site)];
            map.insert(
                site.key_string(),
                serde_json::json!(pt.coords_vec()),
            );
        }
        serde_json::Value::Object(map)
    }
}
