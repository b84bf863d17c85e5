//! Lattice geometry: site indices on `Z^d` and finite rectangular windows.

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

/// Maximum supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of the lattice `Z^d`, `1 <= d <= MAX_DIM`.
///
/// Unused coordinate slots are zero, so the derived lexicographic order is a
/// total order on sites of equal dimension.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteIndex {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl SiteIndex {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "site dimension must be 1..={MAX_DIM}, got {}",
                coords.len()
            )));
        }
        let mut c = [0i64; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(SiteIndex {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    /// 1-D site.
    pub fn d1(i: i64) -> Self {
        SiteIndex {
            dim: 1,
            coords: [i, 0, 0, 0],
        }
    }

    /// 2-D site.
    pub fn d2(i: i64, j: i64) -> Self {
        SiteIndex {
            dim: 2,
            coords: [i, j, 0, 0],
        }
    }

    pub fn zero(dim: usize) -> Self {
        SiteIndex {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn coord(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    /// Component-wise sum; both sites must have equal dimension.
    pub fn offset_by(&self, shift: SiteIndex) -> SiteIndex {
        debug_assert_eq!(self.dim, shift.dim);
        let mut c = self.coords;
        for (ck, sk) in c.iter_mut().zip(shift.coords.iter()) {
            *ck += sk;
        }
        SiteIndex { dim: self.dim, coords: c }
    }

    /// Component-wise difference `self - other`.
    pub fn minus(&self, other: SiteIndex) -> SiteIndex {
        debug_assert_eq!(self.dim, other.dim);
        let mut c = self.coords;
        for (ck, ok) in c.iter_mut().zip(other.coords.iter()) {
            *ck -= ok;
        }
        SiteIndex { dim: self.dim, coords: c }
    }

    pub fn norm_inf(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Chebyshev distance to another site.
    pub fn dist_inf(&self, other: SiteIndex) -> i64 {
        self.minus(other).norm_inf()
    }

    /// Compact key form used in JSON maps: "3" or "3,-1".
    pub fn key_string(&self) -> String {
        self.coords()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parse "3" or "3,-1".
    pub fn parse(text: &str) -> Result<Self> {
        let coords: Vec<i64> = text
            .split(',')
            .map(|t| {
                t.trim().parse::<i64>().map_err(|_| {
                    Error::InvalidArgument(format!("bad site coordinate `{t}` in `{text}`"))
                })
            })
            .collect::<Result<_>>()?;
        SiteIndex::new(&coords)
    }
}

impl fmt::Display for SiteIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.key_string())
    }
}

impl fmt::Debug for SiteIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Finite set of sites; ordered so iteration is deterministic.
pub type SiteSet = BTreeSet<SiteIndex>;

/// Parse a site set like "0;1" (1-D) or "4,4;5,4" (2-D). Sites are separated
/// by ';', coordinates by ','.
pub fn parse_site_set(text: &str) -> Result<SiteSet> {
    let mut set = SiteSet::new();
    for part in text.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        set.insert(SiteIndex::parse(part)?);
    }
    Ok(set)
}

/// Axis-aligned box of sites, iterated in row-major order.
#[derive(Clone, PartialEq, Eq)]
pub struct Window {
    lo: SiteIndex,
    shape: [usize; MAX_DIM],
    dim: u8,
}

impl Window {
    pub fn new(lo: SiteIndex, shape: &[usize]) -> Result<Self> {
        if shape.len() != lo.dim() {
            return Err(Error::InvalidArgument(
                "window shape and origin dimension mismatch".into(),
            ));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidArgument("window axis of length 0".into()));
        }
        let mut sh = [1usize; MAX_DIM];
        sh[..shape.len()].copy_from_slice(shape);
        Ok(Window {
            lo,
            shape: sh,
            dim: shape.len() as u8,
        })
    }

    /// Window with origin 0 and the given shape.
    pub fn from_shape(shape: &[usize]) -> Result<Self> {
        Window::new(SiteIndex::zero(shape.len()), shape)
    }

    /// Parse "16" or "8x8".
    pub fn parse(text: &str) -> Result<Self> {
        let shape: Vec<usize> = text
            .split('x')
            .map(|t| {
                t.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidArgument(format!("bad window extent `{t}` in `{text}`"))
                })
            })
            .collect::<Result<_>>()?;
        Window::from_shape(&shape)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim as usize]
    }

    pub fn lo(&self) -> SiteIndex {
        self.lo
    }

    pub fn volume(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn contains(&self, site: SiteIndex) -> bool {
        if site.dim() != self.dim() {
            return false;
        }
        site.coords().iter().enumerate().all(|(k, &c)| {
            c >= self.lo.coord(k) && c < self.lo.coord(k) + self.shape[k] as i64
        })
    }

    /// Canonical representative of `site` under periodic wrapping.
    pub fn wrap(&self, site: SiteIndex) -> SiteIndex {
        let mut c = [0i64; MAX_DIM];
        for (k, ck) in c.iter_mut().enumerate().take(self.dim()) {
            let l = self.shape[k] as i64;
            *ck = self.lo.coord(k) + (site.coord(k) - self.lo.coord(k)).rem_euclid(l);
        }
        SiteIndex {
            dim: self.dim,
            coords: c,
        }
    }

    /// Row-major flat index of a site inside the window.
    pub fn flat(&self, site: SiteIndex) -> usize {
        debug_assert!(self.contains(site));
        let mut idx = 0usize;
        for k in 0..self.dim() {
            idx = idx * self.shape[k] + (site.coord(k) - self.lo.coord(k)) as usize;
        }
        idx
    }

    pub fn site_at(&self, mut flat: usize) -> SiteIndex {
        let mut c = [0i64; MAX_DIM];
        for k in (0..self.dim()).rev() {
            c[k] = self.lo.coord(k) + (flat % self.shape[k]) as i64;
            flat /= self.shape[k];
        }
        SiteIndex {
            dim: self.dim,
            coords: c,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SiteIndex> + '_ {
        (0..self.volume()).map(|i| self.site_at(i))
    }

    /// The window grown by `margin` sites on every face.
    pub fn expanded(&self, margin: i64) -> Window {
        let mut lo = self.lo;
        let mut shape = self.shape;
        for k in 0..self.dim() {
            lo.coords[k] -= margin;
        }
        for sk in shape.iter_mut().take(self.dim()) {
            *sk += 2 * margin as usize;
        }
        Window {
            lo,
            shape,
            dim: self.dim,
        }
    }

    /// True when every site of `set` is at distance >= `collar` from the
    /// window boundary.
    pub fn is_interior(&self, set: &SiteSet, collar: i64) -> bool {
        set.iter().all(|s| {
            self.contains(*s)
                && (0..self.dim()).all(|k| {
                    let c = s.coord(k);
                    c - self.lo.coord(k) >= collar
                        && self.lo.coord(k) + self.shape[k] as i64 - 1 - c >= collar
                })
        })
    }
}

impl fmt::Debug for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Window(lo={}, shape={:?})",
            self.lo,
            self.shape()
        )
    }
}

/// Smallest window containing every site of the set.
pub fn bounding_box(set: &SiteSet) -> Result<Window> {
    let first = set
        .iter()
        .next()
        .ok_or_else(|| Error::InvalidArgument("bounding box of empty site set".into()))?;
    let d = first.dim();
    let mut lo = [i64::MAX; MAX_DIM];
    let mut hi = [i64::MIN; MAX_DIM];
    for s in set {
        if s.dim() != d {
            return Err(Error::InvalidArgument("mixed dimensions in site set".into()));
        }
        for k in 0..d {
            lo[k] = lo[k].min(s.coord(k));
            hi[k] = hi[k].max(s.coord(k));
        }
    }
    let shape: Vec<usize> = (0..d).map(|k| (hi[k] - lo[k] + 1) as usize).collect();
    Window::new(SiteIndex::new(&lo[..d])?, &shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let a = SiteIndex::d2(0, 1);
        let b = SiteIndex::d2(1, 0);
        let c = SiteIndex::d2(0, 2);
        assert!(a < b);
        assert!(a < c);
        assert!(c < b);
    }

    #[test]
    fn wrap_and_flat() {
        let w = Window::parse("4x4").unwrap();
        assert_eq!(w.volume(), 16);
        assert_eq!(w.wrap(SiteIndex::d2(-1, 5)), SiteIndex::d2(3, 1));
        let s = SiteIndex::d2(2, 3);
        assert_eq!(w.site_at(w.flat(s)), s);
        assert_eq!(w.iter().count(), 16);
    }

    #[test]
    fn interior_checks() {
        let w = Window::parse("8x8").unwrap();
        let mut set = SiteSet::new();
        set.insert(SiteIndex::d2(4, 4));
        assert!(w.is_interior(&set, 1));
        set.insert(SiteIndex::d2(0, 4));
        assert!(!w.is_interior(&set, 1));
    }

    #[test]
    fn parse_site_sets() {
        let s = parse_site_set("0;1").unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains(&SiteIndex::d1(0)));
        let s = parse_site_set("4,4").unwrap();
        assert!(s.contains(&SiteIndex::d2(4, 4)));
    }
}
