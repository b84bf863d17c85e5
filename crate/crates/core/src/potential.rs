//! Finite-range interaction potentials, local Hamiltonians and the
//! Hamiltonian vector field they generate.
//!
//! A potential is a list of terms, each a pattern of site offsets together
//! with an observable over those offsets and a scalar coupling. A
//! translation-invariant potential contributes one translated copy of every
//! term per lattice shift; otherwise the offsets are absolute sites. Only
//! finite-range potentials are representable, so every local Hamiltonian is
//! a finite sum.

use crate::config::{Boundary, Configuration};
use crate::error::{Error, Result};
use crate::lattice::{bounding_box, SiteIndex, SiteSet, Window};
use crate::manifold::{ManifoldKind, SiteManifold};
use crate::observable::{product_bracket, Observable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::BTreeSet;

#[derive(Clone, Debug)]
pub struct PotentialTerm {
    pub offsets: SiteSet,
    pub expr: Observable,
    pub coupling: f64,
}

#[derive(Clone, Debug)]
pub struct Potential {
    terms: Vec<PotentialTerm>,
    translation_invariant: bool,
    kind: ManifoldKind,
    dim: usize,
    range: i64,
}

/// One concrete (possibly translated) copy of a potential term.
#[derive(Clone, Debug)]
pub struct TermInstance {
    pub expr: Observable,
    pub coupling: f64,
    pub support: SiteSet,
    pub term_id: usize,
    pub shift: SiteIndex,
}

impl TermInstance {
    pub fn energy(&self, cfg: &Configuration) -> Result<f64> {
        Ok(self.coupling * self.expr.evaluate(cfg)?)
    }
}

impl Potential {
    pub fn new(
        kind: ManifoldKind,
        dim: usize,
        translation_invariant: bool,
        terms: Vec<PotentialTerm>,
    ) -> Result<Self> {
        let mut range = 0i64;
        for (i, t) in terms.iter().enumerate() {
            if t.offsets.is_empty() {
                return Err(Error::InvalidPotential(format!(
                    "term {i} has an empty offset pattern"
                )));
            }
            if t.expr.kind() != kind {
                return Err(Error::InvalidPotential(format!(
                    "term {i} expression is over {} but the potential is over {}",
                    t.expr.kind(),
                    kind
                )));
            }
            if t.expr.support() != &t.offsets {
                return Err(Error::InvalidPotential(format!(
                    "term {i}: expression support {:?} differs from declared offsets {:?}",
                    t.expr.support(),
                    t.offsets
                )));
            }
            for o in &t.offsets {
                if o.dim() != dim {
                    return Err(Error::InvalidPotential(format!(
                        "term {i} offset {o} has dimension {} but the lattice has {}",
                        o.dim(),
                        dim
                    )));
                }
                for o2 in &t.offsets {
                    range = range.max(o.dist_inf(*o2));
                }
            }
            if !t.coupling.is_finite() {
                return Err(Error::InvalidPotential(format!(
                    "term {i} has non-finite coupling"
                )));
            }
        }
        Ok(Potential {
            terms,
            translation_invariant,
            kind,
            dim,
            range,
        })
    }

    /// The zero potential (Liouville sampling).
    pub fn zero(kind: ManifoldKind, dim: usize) -> Self {
        Potential {
            terms: Vec::new(),
            translation_invariant: true,
            kind,
            dim,
            range: 0,
        }
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    /// Maximum Chebyshev diameter of any term pattern.
    pub fn range(&self) -> i64 {
        self.range
    }

    fn check_periodic_window(&self, cfg: &Configuration) -> Result<()> {
        if matches!(cfg.boundary(), Boundary::Periodic) {
            for (k, &len) in cfg.window().shape().iter().enumerate() {
                if (len as i64) <= 2 * self.range {
                    return Err(Error::InvalidConfiguration(format!(
                        "periodic window axis {k} has length {len} but the potential range is {}; \
                         need length > {} to avoid self-interaction ambiguity",
                        self.range,
                        2 * self.range
                    )));
                }
            }
        }
        Ok(())
    }

    /// All term instances whose support meets `sites`, in the boundary
    /// context of `cfg`. Free-boundary windows truncate the sum to instances
    /// fully inside the window; periodic windows identify translates modulo
    /// the window lengths.
    pub fn instances_touching(
        &self,
        sites: &SiteSet,
        cfg: &Configuration,
    ) -> Result<Vec<TermInstance>> {
        self.check_periodic_window(cfg)?;
        let periodic = matches!(cfg.boundary(), Boundary::Periodic);
        let free = matches!(cfg.boundary(), Boundary::Free);
        let window = cfg.window();
        let mut out = Vec::new();
        if self.translation_invariant {
            for (term_id, term) in self.terms.iter().enumerate() {
                let mut shifts = BTreeSet::new();
                for x in sites {
                    for o in &term.offsets {
                        let t = x.minus(*o);
                        let t = if periodic { window.wrap(t) } else { t };
                        shifts.insert(t);
                    }
                }
                for shift in shifts {
                    let support: SiteSet =
                        term.offsets.iter().map(|o| o.offset_by(shift)).collect();
                    if free && !support.iter().all(|s| window.contains(*s)) {
                        continue;
                    }
                    out.push(TermInstance {
                        expr: term.expr.translate(shift),
                        coupling: term.coupling,
                        support,
                        term_id,
                        shift,
                    });
                }
            }
        } else {
            for (term_id, term) in self.terms.iter().enumerate() {
                let touches = if periodic {
                    term.offsets
                        .iter()
                        .any(|o| sites.contains(&window.wrap(*o)))
                } else {
                    term.offsets.iter().any(|o| sites.contains(o))
                };
                if !touches {
                    continue;
                }
                if free && !term.offsets.iter().all(|s| window.contains(*s)) {
                    continue;
                }
                out.push(TermInstance {
                    expr: term.expr.clone(),
                    coupling: term.coupling,
                    support: term.offsets.clone(),
                    term_id,
                    shift: SiteIndex::zero(self.dim),
                });
            }
        }
        Ok(out)
    }

    /// Term instances containing a given site on the infinite lattice,
    /// ignoring any window truncation. Used by diagnostics.
    pub fn instances_containing(&self, site: SiteIndex) -> Vec<TermInstance> {
        let mut out = Vec::new();
        if self.translation_invariant {
            for (term_id, term) in self.terms.iter().enumerate() {
                let mut shifts = BTreeSet::new();
                for o in &term.offsets {
                    shifts.insert(site.minus(*o));
                }
                for shift in shifts {
                    let support: SiteSet =
                        term.offsets.iter().map(|o| o.offset_by(shift)).collect();
                    out.push(TermInstance {
                        expr: term.expr.translate(shift),
                        coupling: term.coupling,
                        support,
                        term_id,
                        shift,
                    });
                }
            }
        } else {
            for (term_id, term) in self.terms.iter().enumerate() {
                if term.offsets.contains(&site) {
                    out.push(TermInstance {
                        expr: term.expr.clone(),
                        coupling: term.coupling,
                        support: term.offsets.clone(),
                        term_id,
                        shift: SiteIndex::zero(self.dim),
                    });
                }
            }
        }
        out
    }

    /// Local Hamiltonian: the sum of all terms whose support meets `lambda`,
    /// evaluated on the configuration (window values concatenated with the
    /// boundary).
    pub fn local_hamiltonian(&self, lambda: &SiteSet, cfg: &Configuration) -> Result<f64> {
        let mut h = 0.0;
        for inst in self.instances_touching(lambda, cfg)? {
            h += inst.energy(cfg)?;
        }
        Ok(h)
    }

    /// The Hamiltonian vector field applied to `f`:
    /// `X(f) = sum over terms touching supp(f) of {f, term}`.
    /// By bracket compatibility the value does not change if the region is
    /// enlarged beyond supp(f).
    pub fn x_phi(&self, f: &Observable, cfg: &Configuration) -> Result<f64> {
        if f.support().is_empty() {
            return Ok(0.0);
        }
        let insts = self.instances_touching(f.support(), cfg)?;
        x_phi_with(&insts, f, cfg)
    }

    /// C^1-summability diagnostic at site `i`: the finite sum over terms
    /// containing `i` of sup|term| + sup|d term|, with suprema estimated by
    /// maximizing over the quadrature grid plus 10^4 Liouville samples.
    /// The result is a lower-bound estimate of the true norm sum.
    pub fn c1_norm_report(&self, i: SiteIndex, manifold: &SiteManifold) -> Result<f64> {
        let mut total = 0.0;
        let mut cache: Vec<Option<(f64, f64)>> = vec![None; self.terms.len()];
        for inst in self.instances_containing(i) {
            let (sup_v, sup_d) = match cache[inst.term_id] {
                Some(pair) => pair,
                None => {
                    let term = &self.terms[inst.term_id];
                    let pair = sup_norms(&term.expr, manifold)?;
                    cache[inst.term_id] = Some(pair);
                    pair
                }
            };
            total += inst.coupling.abs() * (sup_v + sup_d);
        }
        Ok(total)
    }
}

/// `X(f)` evaluated with a precomputed instance list (the instances touching
/// supp(f)); avoids re-enumerating terms in inner loops.
pub fn x_phi_with(insts: &[TermInstance], f: &Observable, cfg: &Configuration) -> Result<f64> {
    let mut sum = 0.0;
    for inst in insts {
        sum += inst.coupling * product_bracket(f, &inst.expr, cfg)?;
    }
    Ok(sum)
}

/// Estimate (sup |f|, sup ||df||) over the configurations of f's own support,
/// using the full quadrature grid for supports of up to two sites (a coarse
/// grid beyond that) plus 10^4 Liouville samples. Gradient norms stack the
/// ambient per-site gradients.
fn sup_norms(f: &Observable, manifold: &SiteManifold) -> Result<(f64, f64)> {
    if f.support().is_empty() {
        // Constant expression: evaluate once on a dummy site.
        let w = Window::from_shape(&[1])?;
        let cfg = Configuration::filled(
            w,
            Boundary::Free,
            default_point(manifold.kind()),
        );
        let v = f.evaluate(&cfg)?.abs();
        return Ok((v, 0.0));
    }
    let sites: Vec<SiteIndex> = f.support().iter().cloned().collect();
    let window = bounding_box(f.support())?;
    let mut cfg = Configuration::filled(
        window,
        Boundary::Free,
        default_point(manifold.kind()),
    );

    let grid = if sites.len() <= 2 {
        manifold.clone()
    } else {
        SiteManifold::new(manifold.kind(), 6)?
    };
    let nodes = grid.nodes();

    let mut sup_v: f64 = 0.0;
    let mut sup_d: f64 = 0.0;
    let visit = |cfg: &Configuration, sup_v: &mut f64, sup_d: &mut f64| -> Result<()> {
        let v = f.evaluate(cfg)?;
        if v.abs() > *sup_v {
            *sup_v = v.abs();
        }
        let mut g2 = 0.0;
        for s in &sites {
            let g = f.grad_site(cfg, *s)?;
            g2 += g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        }
        let gn = g2.sqrt();
        if gn > *sup_d {
            *sup_d = gn;
        }
        Ok(())
    };

    // Full tensor grid.
    let mut idx = vec![0usize; sites.len()];
    loop {
        for (k, s) in sites.iter().enumerate() {
            cfg.set(*s, nodes[idx[k]].0)?;
        }
        visit(&cfg, &mut sup_v, &mut sup_d)?;
        let mut k = 0;
        loop {
            if k == sites.len() {
                break;
            }
            idx[k] += 1;
            if idx[k] < nodes.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == sites.len() {
            break;
        }
    }

    // Liouville samples (fixed seed keeps the report deterministic).
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    for _ in 0..10_000 {
        for s in &sites {
            cfg.set(*s, manifold.uniform_sample(&mut rng))?;
        }
        visit(&cfg, &mut sup_v, &mut sup_d)?;
    }

    Ok((sup_v, sup_d))
}

fn default_point(kind: ManifoldKind) -> crate::manifold::SitePoint {
    match kind {
        ManifoldKind::Sphere2 => crate::manifold::SitePoint::north(),
        ManifoldKind::Torus2 => crate::manifold::SitePoint::Torus { q: 0.0, p: 0.0 },
    }
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// A model file: manifold, lattice dimension and potential terms.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub manifold: ManifoldKind,
    pub dim: usize,
    pub potential: Potential,
    pub beta: f64,
}

#[derive(Deserialize)]
struct ModelFile {
    manifold: String,
    dimension: usize,
    translation_invariant: bool,
    beta: Option<f64>,
    #[serde(rename = "term")]
    terms: Vec<TermFile>,
}

#[derive(Deserialize)]
struct TermFile {
    offsets: Vec<Vec<i64>>,
    expr: String,
    coupling: Option<f64>,
}

impl Model {
    pub fn from_toml_str(name: &str, text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text)?;
        let kind = ManifoldKind::parse(&file.manifold)?;
        let mut terms = Vec::new();
        for t in &file.terms {
            let mut offsets = SiteSet::new();
            for o in &t.offsets {
                offsets.insert(SiteIndex::new(o)?);
            }
            let expr = Observable::parse(&t.expr, kind)?;
            terms.push(PotentialTerm {
                offsets,
                expr,
                coupling: t.coupling.unwrap_or(1.0),
            });
        }
        let potential = Potential::new(kind, file.dimension, file.translation_invariant, terms)?;
        Ok(Model {
            name: name.to_string(),
            manifold: kind,
            dim: file.dimension,
            potential,
            beta: file.beta.unwrap_or(1.0),
        })
    }
}
