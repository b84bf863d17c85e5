//! Finite-region Gibbs kernels: exact tensor-product quadrature for small
//! regions and single-site Metropolis MCMC for larger windows, plus kernel
//! composition and a detailed-balance audit.
//!
//! The kernel on a region L with boundary condition eta weights the Liouville
//! measure on the L sites by exp(-beta * H_L), where H_L sums every potential
//! term touching L. The partition function is computed only in the quadrature
//! engine; MCMC works with energy differences.

use crate::config::{Boundary, Configuration};
use crate::error::{Error, Result};
use crate::lattice::{SiteIndex, SiteSet};
use crate::manifold::{SiteManifold, SitePoint, TWO_PI};
use crate::observable::Observable;
use crate::potential::{Potential, TermInstance};
use crate::stats::{pool, BatchAccumulator, Kahan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Single-site proposal distribution. Both choices are symmetric with
/// respect to the Liouville measure, so the Metropolis ratio is just
/// exp(-beta * dH).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Proposal {
    /// Resample the site from the Liouville measure.
    UniformSite,
    /// Perturb within a cap / box of angular scale kappa around the current
    /// point; kappa is auto-tuned to 30-60% acceptance during burn-in.
    Cone { kappa: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McmcParams {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal: Proposal,
    pub seed: u64,
    pub chains: usize,
}

impl Default for McmcParams {
    fn default() -> Self {
        McmcParams {
            sweeps: 20_000,
            burn_in: 1_000,
            thin: 1,
            proposal: Proposal::UniformSite,
            seed: 0,
            chains: 2,
        }
    }
}

impl McmcParams {
    fn validate(&self) -> Result<()> {
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::InvalidArgument("chains must be >= 1".into()));
        }
        Ok(())
    }

    pub fn records_per_chain(&self) -> usize {
        (self.sweeps - self.burn_in).div_ceil(self.thin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateKind {
    QuadratureBound,
    McStdErr,
}

/// A numerical expectation with provenance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub kind: EstimateKind,
    pub n_effective: f64,
}

impl Estimate {
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if self.error > 0.0 {
            d / self.error
        } else if d == 0.0 {
            0.0
        } else {
            f64::MAX.sqrt().copysign(d)
        }
    }
}

#[derive(Clone, Debug)]
pub enum Engine {
    Quadrature,
    Mcmc(McmcParams),
}

/// The Lambda-Gibbs kernel for a potential at inverse temperature beta.
#[derive(Clone, Debug)]
pub struct GibbsKernel {
    pub phi: Potential,
    pub manifold: SiteManifold,
    pub lambda: SiteSet,
    pub beta: f64,
    pub engine: Engine,
}

const QUAD_SITE_LIMIT: usize = 3;
const NESTED_SITE_LIMIT: usize = 2;

impl GibbsKernel {
    pub fn quadrature(
        phi: Potential,
        manifold: SiteManifold,
        lambda: SiteSet,
        beta: f64,
    ) -> Result<Self> {
        if lambda.len() > QUAD_SITE_LIMIT {
            return Err(Error::CostGuard(format!(
                "quadrature kernels are limited to {QUAD_SITE_LIMIT} sites, got {}",
                lambda.len()
            )));
        }
        check_beta(beta)?;
        Ok(GibbsKernel {
            phi,
            manifold,
            lambda,
            beta,
            engine: Engine::Quadrature,
        })
    }

    pub fn mcmc(
        phi: Potential,
        manifold: SiteManifold,
        lambda: SiteSet,
        beta: f64,
        params: McmcParams,
    ) -> Result<Self> {
        params.validate()?;
        check_beta(beta)?;
        Ok(GibbsKernel {
            phi,
            manifold,
            lambda,
            beta,
            engine: Engine::Mcmc(params),
        })
    }

    /// Expectation of an observable under the kernel with boundary `eta`.
    pub fn expectation(&self, f: &Observable, eta: &Configuration) -> Result<Estimate> {
        for s in f.support() {
            if !self.lambda.contains(s) && eta.get(*s).is_err() {
                return Err(Error::MissingSite { site: *s });
            }
        }
        self.expectation_fn(&|cfg| f.evaluate(cfg), eta)
    }

    /// Expectation of an arbitrary integrand (a function of the
    /// configuration) under the kernel.
    pub fn expectation_fn(
        &self,
        integrand: &(dyn Fn(&Configuration) -> Result<f64> + Sync),
        eta: &Configuration,
    ) -> Result<Estimate> {
        if self.lambda.is_empty() {
            // Point mass at eta.
            return Ok(Estimate {
                value: integrand(eta)?,
                error: 0.0,
                kind: EstimateKind::QuadratureBound,
                n_effective: 1.0,
            });
        }
        match &self.engine {
            Engine::Quadrature => {
                let full = quad_weighted_mean(
                    &self.phi,
                    self.beta,
                    &self.lambda,
                    &self.manifold,
                    eta,
                    integrand,
                )?;
                let half_order = (self.manifold.quadrature_order() / 2).max(2);
                let half_manifold = SiteManifold::new(self.manifold.kind(), half_order)?;
                let half = quad_weighted_mean(
                    &self.phi,
                    self.beta,
                    &self.lambda,
                    &half_manifold,
                    eta,
                    integrand,
                )?;
                let err = (full - half).abs() + 4.0 * f64::EPSILON * (1.0 + full.abs());
                let n_nodes =
                    (self.manifold.nodes().len() as f64).powi(self.lambda.len() as i32);
                Ok(Estimate {
                    value: full,
                    error: err,
                    kind: EstimateKind::QuadratureBound,
                    n_effective: n_nodes,
                })
            }
            Engine::Mcmc(params) => {
                let groups = vec![EvalGroup {
                    arity: 1,
                    eval: Box::new(move |cfg: &Configuration, out: &mut [f64]| {
                        out[0] = integrand(cfg)?;
                        Ok(())
                    }),
                }];
                let est = mcmc_group_estimates(
                    &self.phi,
                    &self.manifold,
                    self.beta,
                    eta,
                    &self.lambda,
                    params,
                    &groups,
                )?;
                Ok(est[0])
            }
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be a positive real, got {beta}"
        )));
    }
    Ok(())
}

/// Iterate over all tensor-product node assignments of `sites`, invoking the
/// visitor with the configured scratch, the product weight and the node
/// index vector. Visitation order is fixed, so reductions are deterministic.
pub(crate) fn tensor_scan<F>(
    cfg: &mut Configuration,
    sites: &[SiteIndex],
    nodes: &[(SitePoint, f64)],
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&Configuration, f64, &[usize]) -> Result<()>,
{
    if sites.is_empty() {
        return visit(cfg, 1.0, &[]);
    }
    let mut idx = vec![0usize; sites.len()];
    loop {
        for (k, s) in sites.iter().enumerate() {
            cfg.set(*s, nodes[idx[k]].0)?;
        }
        let w: f64 = idx.iter().map(|&i| nodes[i].1).product();
        visit(cfg, w, &idx)?;
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < nodes.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == sites.len() {
                return Ok(());
            }
        }
    }
}

fn describe_node(sites: &[SiteIndex], cfg: &Configuration) -> String {
    sites
        .iter()
        .map(|s| format!("{s}={:?}", cfg.get(*s).ok()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Z-normalized Gibbs average of `integrand` over the region by tensor
/// quadrature at the order of `manifold`.
fn quad_weighted_mean(
    phi: &Potential,
    beta: f64,
    lambda: &SiteSet,
    manifold: &SiteManifold,
    eta: &Configuration,
    integrand: &(dyn Fn(&Configuration) -> Result<f64> + Sync),
) -> Result<f64> {
    let sites: Vec<SiteIndex> = lambda.iter().cloned().collect();
    for s in &sites {
        if !eta.window().contains(*s) && !matches!(eta.boundary(), Boundary::Periodic) {
            return Err(Error::InvalidConfiguration(format!(
                "kernel region site {s} lies outside the boundary-condition window"
            )));
        }
    }
    let insts = phi.instances_touching(lambda, eta)?;
    let mut cfg = eta.clone();
    let mut num = Kahan::new();
    let mut den = Kahan::new();
    tensor_scan(&mut cfg, &sites, manifold.nodes(), |cfg, w, _| {
        let mut h = 0.0;
        for inst in &insts {
            h += inst.energy(cfg)?;
        }
        if !h.is_finite() {
            return Err(Error::NonFiniteIntegrand {
                node: describe_node(&sites, cfg),
                value: h,
            });
        }
        let weight = w * (-beta * h).exp();
        let v = integrand(cfg)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand {
                node: describe_node(&sites, cfg),
                value: v,
            });
        }
        num.add(weight * v);
        den.add(weight);
        Ok(())
    })?;
    Ok(num.sum() / den.sum())
}

// ---------------------------------------------------------------------------
// Metropolis sampler
// ---------------------------------------------------------------------------

struct Sampler<'a> {
    manifold: &'a SiteManifold,
    beta: f64,
    cfg: Configuration,
    active: Vec<SiteIndex>,
    site_insts: Vec<Vec<TermInstance>>,
    proposal: Proposal,
    kappa: f64,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
}

impl<'a> Sampler<'a> {
    fn new(
        phi: &Potential,
        manifold: &'a SiteManifold,
        beta: f64,
        cfg: Configuration,
        active: &SiteSet,
        proposal: Proposal,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let active_vec: Vec<SiteIndex> = active.iter().cloned().collect();
        let mut site_insts = Vec::with_capacity(active_vec.len());
        for s in &active_vec {
            let single: SiteSet = [*s].into_iter().collect();
            site_insts.push(phi.instances_touching(&single, &cfg)?);
        }
        let kappa = match proposal {
            Proposal::Cone { kappa } => kappa,
            Proposal::UniformSite => 0.0,
        };
        Ok(Sampler {
            manifold,
            beta,
            cfg,
            active: active_vec,
            site_insts,
            proposal,
            kappa,
            rng,
            accepted: 0,
            proposed: 0,
        })
    }

    fn propose(&mut self, current: SitePoint) -> SitePoint {
        match self.proposal {
            Proposal::UniformSite => self.manifold.uniform_sample(&mut self.rng),
            Proposal::Cone { .. } => match current {
                SitePoint::Sphere(s) => {
                    // Uniform on the cap of angular radius kappa around s.
                    let cos_k = self.kappa.min(std::f64::consts::PI).cos();
                    let ca = cos_k + (1.0 - cos_k) * self.rng.random::<f64>();
                    let sa = (1.0 - ca * ca).max(0.0).sqrt();
                    let phi = TWO_PI * self.rng.random::<f64>();
                    // Orthonormal frame around s.
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
                    let (cp, sp) = (phi.cos(), phi.sin());
                    let v = [
                        ca * s[0] + sa * (cp * e1[0] + sp * e2[0]),
                        ca * s[1] + sa * (cp * e1[1] + sp * e2[1]),
                        ca * s[2] + sa * (cp * e1[2] + sp * e2[2]),
                    ];
                    SitePoint::sphere_normalized(v).expect("cap point is non-zero")
                }
                SitePoint::Torus { q, p } => {
                    let dq = self.kappa * (2.0 * self.rng.random::<f64>() - 1.0);
                    let dp = self.kappa * (2.0 * self.rng.random::<f64>() - 1.0);
                    SitePoint::Torus {
                        q: (q + dq).rem_euclid(TWO_PI),
                        p: (p + dp).rem_euclid(TWO_PI),
                    }
                }
            },
        }
    }

    fn sweep(&mut self) -> Result<()> {
        for k in 0..self.active.len() {
            let site = self.active[k];
            let old = self.cfg.get(site)?;
            let candidate = self.propose(old);
            let mut before = 0.0;
            let mut after = 0.0;
            for inst in &self.site_insts[k] {
                before += inst.energy(&self.cfg)?;
            }
            self.cfg.set(site, candidate)?;
            for inst in &self.site_insts[k] {
                after += inst.energy(&self.cfg)?;
            }
            let dh = after - before;
            if !dh.is_finite() {
                return Err(Error::NonFiniteEnergy {
                    site,
                    dump: self.cfg.to_json().to_string(),
                });
            }
            let accept = dh <= 0.0 || self.rng.random::<f64>() < (-self.beta * dh).exp();
            if accept {
                self.accepted += 1;
            } else {
                self.cfg.set(site, old)?;
            }
            self.proposed += 1;
        }
        Ok(())
    }

    fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// Burn-in with cone-width tuning towards 30-60% acceptance.
    fn burn_in(&mut self, sweeps: usize) -> Result<()> {
        let tune_every = 50usize;
        let mut since_tune = 0usize;
        for _ in 0..sweeps {
            self.sweep()?;
            since_tune += 1;
            if matches!(self.proposal, Proposal::Cone { .. }) && since_tune == tune_every {
                let rate = self.acceptance_rate();
                if rate > 0.6 {
                    self.kappa = (self.kappa * 1.3).min(std::f64::consts::PI);
                } else if rate < 0.3 {
                    self.kappa = (self.kappa / 1.3).max(1e-3);
                }
                self.reset_counters();
                since_tune = 0;
            }
        }
        self.reset_counters();
        Ok(())
    }
}

/// A block of integrands evaluated together on each recorded sample.
pub struct EvalGroup<'a> {
    pub arity: usize,
    #[allow(clippy::type_complexity)]
    pub eval: Box<dyn Fn(&Configuration, &mut [f64]) -> Result<()> + Sync + 'a>,
}

/// Run `params.chains` independent Metropolis chains on the `active` region
/// (boundary taken from `eta`) and estimate every group output by pooled
/// batch means. Chain c uses the master seed with RNG stream c, so adding
/// chains never perturbs existing ones. Results are deterministic for a
/// fixed seed regardless of thread scheduling.
pub fn mcmc_group_estimates(
    phi: &Potential,
    manifold: &SiteManifold,
    beta: f64,
    eta: &Configuration,
    active: &SiteSet,
    params: &McmcParams,
    groups: &[EvalGroup],
) -> Result<Vec<Estimate>> {
    params.validate()?;
    check_beta(beta)?;
    let n_out: usize = groups.iter().map(|g| g.arity).sum();
    let records = params.records_per_chain();

    let chain_accs: Vec<Vec<BatchAccumulator>> = (0..params.chains)
        .into_par_iter()
        .map(|chain| -> Result<Vec<BatchAccumulator>> {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(chain as u64);
            let mut cfg = eta.clone();
            for s in active {
                cfg.set(*s, manifold.uniform_sample(&mut rng))?;
            }
            let mut sampler =
                Sampler::new(phi, manifold, beta, cfg, active, params.proposal, rng)?;
            sampler.burn_in(params.burn_in)?;
            let mut accs = vec![BatchAccumulator::new(records, 20); n_out];
            let mut buf = vec![0.0f64; n_out];
            for t in 0..(params.sweeps - params.burn_in) {
                sampler.sweep()?;
                if t % params.thin == 0 {
                    let mut off = 0;
                    for g in groups {
                        (g.eval)(&sampler.cfg, &mut buf[off..off + g.arity])?;
                        off += g.arity;
                    }
                    for (acc, &v) in accs.iter_mut().zip(buf.iter()) {
                        if !v.is_finite() {
                            return Err(Error::NonFiniteIntegrand {
                                node: "mcmc sample".into(),
                                value: v,
                            });
                        }
                        acc.push(v);
                    }
                }
            }
            Ok(accs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let per_chain: Vec<BatchAccumulator> =
            chain_accs.iter().map(|c| c[i].clone()).collect();
        let s = pool(&per_chain);
        out.push(Estimate {
            value: s.mean,
            error: s.std_err,
            kind: EstimateKind::McStdErr,
            n_effective: s.n_effective,
        });
    }
    Ok(out)
}

/// Post-burn-in, thinned Metropolis stream over the kernel region. The
/// visitor receives the sweep index, the configuration and the local
/// Hamiltonian of the region.
pub fn mcmc_sample_stream<F>(
    kernel: &GibbsKernel,
    eta: &Configuration,
    mut visit: F,
) -> Result<McmcRunStats>
where
    F: FnMut(usize, &Configuration, f64) -> Result<()>,
{
    let params = match &kernel.engine {
        Engine::Mcmc(p) => *p,
        Engine::Quadrature => {
            return Err(Error::InvalidArgument(
                "sample streams need an MCMC kernel".into(),
            ))
        }
    };
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(0);
    let mut cfg = eta.clone();
    for s in &kernel.lambda {
        cfg.set(*s, kernel.manifold.uniform_sample(&mut rng))?;
    }
    let region_insts = kernel.phi.instances_touching(&kernel.lambda, &cfg)?;
    let mut sampler = Sampler::new(
        &kernel.phi,
        &kernel.manifold,
        kernel.beta,
        cfg,
        &kernel.lambda,
        params.proposal,
        rng,
    )?;
    sampler.burn_in(params.burn_in)?;
    for t in 0..(params.sweeps - params.burn_in) {
        sampler.sweep()?;
        if t % params.thin == 0 {
            let mut h = 0.0;
            for inst in &region_insts {
                h += inst.energy(&sampler.cfg)?;
            }
            visit(params.burn_in + t, &sampler.cfg, h)?;
        }
    }
    Ok(McmcRunStats {
        acceptance_rate: sampler.acceptance_rate(),
        kappa: sampler.kappa,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct McmcRunStats {
    pub acceptance_rate: f64,
    pub kappa: f64,
}

// ---------------------------------------------------------------------------
// Kernel composition
// ---------------------------------------------------------------------------

/// Expectation of the composed kernel: outer region average of the inner
/// kernel's conditional expectation, E_outer[ w -> E_inner[f | w] | eta ].
///
/// The inner kernel must use quadrature. A quadrature outer kernel is
/// limited to two sites; larger outer regions must use MCMC.
pub fn kernel_compose_expectation(
    outer: &GibbsKernel,
    inner: &GibbsKernel,
    f: &Observable,
    eta: &Configuration,
) -> Result<Estimate> {
    if !inner.lambda.is_subset(&outer.lambda) {
        return Err(Error::InvalidArgument(
            "inner region must be contained in the outer region".into(),
        ));
    }
    if !matches!(inner.engine, Engine::Quadrature) {
        return Err(Error::CostGuard(
            "composition requires a quadrature inner kernel".into(),
        ));
    }
    match &outer.engine {
        Engine::Mcmc(_) => {
            let integrand = move |cfg: &Configuration| -> Result<f64> {
                Ok(inner.expectation(f, cfg)?.value)
            };
            outer.expectation_fn(&integrand, eta)
        }
        Engine::Quadrature => {
            if outer.lambda.len() > NESTED_SITE_LIMIT {
                return Err(Error::CostGuard(format!(
                    "nested quadrature is limited to {NESTED_SITE_LIMIT} outer sites, got {}",
                    outer.lambda.len()
                )));
            }
            // The inner conditional expectation depends on the outer
            // assignment only through sites outside the inner region that
            // either carry f or couple into it; memoize on those.
            let outer_sites: Vec<SiteIndex> = outer.lambda.iter().cloned().collect();
            let mut needed: SiteSet = f.support().clone();
            for inst in inner.phi.instances_touching(&inner.lambda, eta)? {
                needed.extend(inst.support.iter().cloned());
            }
            let dep_positions: Vec<usize> = outer_sites
                .iter()
                .enumerate()
                .filter(|(_, s)| needed.contains(s) && !inner.lambda.contains(s))
                .map(|(k, _)| k)
                .collect();

            let insts_outer = outer.phi.instances_touching(&outer.lambda, eta)?;

            let run_order = |manifold: &SiteManifold,
                             memo: &mut HashMap<Vec<u32>, (f64, f64)>|
             -> Result<(f64, f64)> {
                let mut cfg = eta.clone();
                let mut num = Kahan::new();
                let mut den = Kahan::new();
                let mut err_acc = Kahan::new();
                tensor_scan(&mut cfg, &outer_sites, manifold.nodes(), |cfg, w, idx| {
                    let mut h = 0.0;
                    for inst in &insts_outer {
                        h += inst.energy(cfg)?;
                    }
                    if !h.is_finite() {
                        return Err(Error::NonFiniteIntegrand {
                            node: describe_node(&outer_sites, cfg),
                            value: h,
                        });
                    }
                    let weight = w * (-outer.beta * h).exp();
                    let key: Vec<u32> = dep_positions.iter().map(|&k| idx[k] as u32).collect();
                    let (val, err) = match memo.get(&key) {
                        Some(&pair) => pair,
                        None => {
                            let est = inner.expectation(f, cfg)?;
                            memo.insert(key, (est.value, est.error));
                            (est.value, est.error)
                        }
                    };
                    num.add(weight * val);
                    den.add(weight);
                    err_acc.add(weight * err);
                    Ok(())
                })?;
                Ok((num.sum() / den.sum(), err_acc.sum() / den.sum()))
            };

            // Memo keys are node indices, so each order gets its own table.
            let mut memo_full = HashMap::new();
            let (full, inner_err) = run_order(&outer.manifold, &mut memo_full)?;
            let half_order = (outer.manifold.quadrature_order() / 2).max(2);
            let half_manifold = SiteManifold::new(outer.manifold.kind(), half_order)?;
            let mut memo_half = HashMap::new();
            let (half, _) = run_order(&half_manifold, &mut memo_half)?;
            let err =
                (full - half).abs() + inner_err + 4.0 * f64::EPSILON * (1.0 + full.abs());
            let n_nodes =
                (outer.manifold.nodes().len() as f64).powi(outer.lambda.len() as i32);
            Ok(Estimate {
                value: full,
                error: err,
                kind: EstimateKind::QuadratureBound,
                n_effective: n_nodes,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Detailed-balance audit
// ---------------------------------------------------------------------------

/// Check the Metropolis identity a(x->y)/a(y->x) = exp(-beta*dH) on random
/// (state, proposal) pairs; returns the maximum relative violation.
pub fn detailed_balance_audit(
    phi: &Potential,
    manifold: &SiteManifold,
    beta: f64,
    proto: &Configuration,
    active: &SiteSet,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    check_beta(beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX); // never collides with chain streams
    let mut cfg = proto.clone();
    let sites: Vec<SiteIndex> = active.iter().cloned().collect();
    let mut site_insts = Vec::with_capacity(sites.len());
    for s in &sites {
        let single: SiteSet = [*s].into_iter().collect();
        site_insts.push(phi.instances_touching(&single, &cfg)?);
    }
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        for s in &sites {
            cfg.set(*s, manifold.uniform_sample(&mut rng))?;
        }
        let k = rng.random_range(0..sites.len());
        let site = sites[k];
        let old = cfg.get(site)?;
        let candidate = manifold.uniform_sample(&mut rng);
        let mut before = 0.0;
        for inst in &site_insts[k] {
            before += inst.energy(&cfg)?;
        }
        cfg.set(site, candidate)?;
        let mut after = 0.0;
        for inst in &site_insts[k] {
            after += inst.energy(&cfg)?;
        }
        cfg.set(site, old)?;
        let dh = after - before;
        let r = (-beta * dh).exp();
        let a_fwd = r.min(1.0);
        let a_bwd = (beta * dh).exp().min(1.0);
        let viol = (a_fwd / a_bwd / r - 1.0).abs();
        worst = worst.max(viol);
    }
    Ok(worst)
}
