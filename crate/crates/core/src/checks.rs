//! Executable equivalence experiments: KMS residuals of Gibbs kernels,
//! DLR invariance of the finite-box Gibbs measure, the tilted functional
//! that strips the Gibbs weight, and a quasi-local approximation probe.
//!
//! Every suite produces a `CheckReport` with one row per tested pair and an
//! aggregate verdict. A finite corpus is a spot check of identities that
//! quantify over all smooth local functions; reports carry a corpus note for
//! that reason.

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::gibbs::{
    mcmc_group_estimates, Engine, Estimate, EstimateKind, EvalGroup, GibbsKernel, McmcParams,
};
use crate::lattice::{bounding_box, SiteIndex, SiteSet};
use crate::manifold::{ManifoldKind, SiteManifold, SitePoint};
use crate::observable::{product_bracket, Observable};
use crate::potential::{x_phi_with, Potential};
use crate::stats::Kahan;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Clone, Copy, Debug)]
pub struct CheckSettings {
    /// |z| at or below this passes (MCMC regime).
    pub z_pass: f64,
    /// |z| at or above this fails; the band between is inconclusive.
    pub z_fail: f64,
    /// Absolute residual tolerance in the quadrature regime.
    pub quad_tol: f64,
    /// Minimum effective sample size before a z-score is trusted.
    pub n_eff_floor: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            z_pass: 4.0,
            z_fail: 5.0,
            quad_tol: 1e-8,
            n_eff_floor: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairResult {
    pub f: String,
    pub g: String,
    pub residual: f64,
    pub stderr: f64,
    pub z: f64,
    pub n_effective: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub model_hash: String,
    pub pairs: Vec<PairResult>,
    pub verdict: Verdict,
    pub seed: u64,
    pub runtime_sec: f64,
    pub corpus_note: String,
}

impl CheckReport {
    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON value with the timing field removed; two runs with the same seed
    /// and configuration must agree byte-for-byte on this.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("runtime_sec");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("f,g,residual,stderr,z,n_effective\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "\"{}\",\"{}\",{:e},{:e},{:e},{:e}\n",
                p.f, p.g, p.residual, p.stderr, p.z, p.n_effective
            ));
        }
        out
    }
}

/// Report identity fields supplied by the caller.
#[derive(Clone, Debug, Default)]
pub struct ReportMeta {
    pub name: String,
    pub model_hash: String,
    pub seed: u64,
}

fn pair_result(f: &Observable, g_label: String, est: &Estimate) -> PairResult {
    let z = est.z_score(0.0);
    PairResult {
        f: f.to_string(),
        g: g_label,
        residual: est.value,
        stderr: est.error,
        z,
        n_effective: est.n_effective,
    }
}

fn verdict_for(est: &Estimate, settings: &CheckSettings) -> Verdict {
    match est.kind {
        EstimateKind::QuadratureBound => {
            if est.value.abs() <= settings.quad_tol {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        EstimateKind::McStdErr => {
            if est.n_effective < settings.n_eff_floor {
                return Verdict::Inconclusive;
            }
            let z = est.z_score(0.0).abs();
            if z <= settings.z_pass {
                Verdict::Pass
            } else if z >= settings.z_fail {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            }
        }
    }
}

fn aggregate(verdicts: &[Verdict]) -> Verdict {
    if verdicts.contains(&Verdict::Fail) {
        Verdict::Fail
    } else if verdicts.contains(&Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

// ---------------------------------------------------------------------------
// KMS residuals
// ---------------------------------------------------------------------------

/// KMS residual of a state against the field generated by `phi`:
/// `E[{f,g}] - E[g * X(f)]`, evaluated as a single integrand so both terms
/// see identical samples (the MC estimator is covariance-aware).
pub fn kms_residual(
    kernel: &GibbsKernel,
    phi: &Potential,
    f: &Observable,
    g: &Observable,
    eta: &Configuration,
) -> Result<Estimate> {
    let insts = phi.instances_touching(f.support(), eta)?;
    let integrand = move |cfg: &Configuration| -> Result<f64> {
        Ok(product_bracket(f, g, cfg)? - g.evaluate(cfg)? * x_phi_with(&insts, f, cfg)?)
    };
    kernel.expectation_fn(&integrand, eta)
}

/// KMS residual suite for a finite-region Gibbs kernel (the identity used in
/// the Gibbs-implies-KMS direction). Corpus pairs whose `f` support escapes
/// the kernel region are skipped and counted in the corpus note.
pub fn kms_kernel_suite(
    kernel: &GibbsKernel,
    eta: &Configuration,
    pairs: &[(Observable, Observable)],
    settings: &CheckSettings,
    meta: &ReportMeta,
) -> Result<CheckReport> {
    let start = Instant::now();
    let usable: Vec<&(Observable, Observable)> = pairs
        .iter()
        .filter(|(f, _)| f.support().is_subset(&kernel.lambda))
        .collect();
    let skipped = pairs.len() - usable.len();

    let results: Vec<(PairResult, Verdict)> = usable
        .par_iter()
        .map(|(f, g)| -> Result<(PairResult, Verdict)> {
            let est = kms_residual(kernel, &kernel.phi, f, g, eta)?;
            Ok((
                pair_result(f, g.to_string(), &est),
                verdict_for(&est, settings),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let verdict = aggregate(&results.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    Ok(CheckReport {
        name: meta.name.clone(),
        model_hash: meta.model_hash.clone(),
        pairs: results.into_iter().map(|(p, _)| p).collect(),
        verdict,
        seed: meta.seed,
        runtime_sec: start.elapsed().as_secs_f64(),
        corpus_note: format!(
            "finite corpus spot check: {} pairs evaluated, {} skipped (f support outside region); \
             the KMS identity quantifies over all smooth local functions",
            usable.len(),
            skipped
        ),
    })
}

/// KMS residual suite against the Gibbs measure of a periodic box sampled by
/// MCMC. `beta_sample` is the sampling temperature; the vector field is
/// always the one generated by `phi` itself, so sampling at a mismatched
/// temperature is the intended negative control.
#[allow(clippy::too_many_arguments)]
pub fn kms_mcmc_suite(
    phi: &Potential,
    manifold: &SiteManifold,
    proto: &Configuration,
    beta_sample: f64,
    params: &McmcParams,
    pairs: &[(Observable, Observable)],
    settings: &CheckSettings,
    meta: &ReportMeta,
) -> Result<CheckReport> {
    let start = Instant::now();
    let window_sites: SiteSet = proto.window().iter().collect();

    let mut usable: Vec<&(Observable, Observable)> = Vec::new();
    let mut skipped = 0usize;
    for pair in pairs {
        let mut sup: SiteSet = pair.0.support().clone();
        sup.extend(pair.1.support().iter().cloned());
        if sup.is_empty() || fits_in_window(&sup, proto) {
            usable.push(pair);
        } else {
            skipped += 1;
        }
    }

    let mut insts_per_pair = Vec::with_capacity(usable.len());
    for (f, _) in &usable {
        insts_per_pair.push(phi.instances_touching(f.support(), proto)?);
    }
    let groups: Vec<EvalGroup> = usable
        .iter()
        .zip(insts_per_pair.iter())
        .map(|((f, g), insts)| EvalGroup {
            arity: 1,
            eval: Box::new(move |cfg: &Configuration, out: &mut [f64]| {
                out[0] =
                    product_bracket(f, g, cfg)? - g.evaluate(cfg)? * x_phi_with(insts, f, cfg)?;
                Ok(())
            }),
        })
        .collect();

    let estimates = mcmc_group_estimates(
        phi,
        manifold,
        beta_sample,
        proto,
        &window_sites,
        params,
        &groups,
    )?;

    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for ((f, g), est) in usable.iter().zip(estimates.iter()) {
        rows.push(pair_result(f, g.to_string(), est));
        verdicts.push(verdict_for(est, settings));
    }
    Ok(CheckReport {
        name: meta.name.clone(),
        model_hash: meta.model_hash.clone(),
        pairs: rows,
        verdict: aggregate(&verdicts),
        seed: meta.seed,
        runtime_sec: start.elapsed().as_secs_f64(),
        corpus_note: format!(
            "finite corpus spot check: {} pairs evaluated, {skipped} skipped (support exceeds window); \
             sampling beta = {beta_sample}, field generated at beta = 1",
            usable.len()
        ),
    })
}

fn fits_in_window(sup: &SiteSet, proto: &Configuration) -> bool {
    let Ok(bbox) = bounding_box(sup) else {
        return false;
    };
    if bbox.dim() != proto.window().dim() {
        return false;
    }
    bbox.shape()
        .iter()
        .zip(proto.window().shape().iter())
        .all(|(e, l)| e <= l)
        && sup.iter().all(|s| proto.get(*s).is_ok())
}

// ---------------------------------------------------------------------------
// DLR invariance
// ---------------------------------------------------------------------------

/// DLR self-consistency on a periodic box: compare `E_mu[f]` with
/// `E_mu[eta -> E^phi_Lambda[f | eta]]` from the same MCMC stream, for every
/// interior region in `lambdas`. The inner conditional expectation runs the
/// quadrature kernel at `beta_kernel`; sampling runs at `beta_sample`
/// (mismatch is the negative control).
#[allow(clippy::too_many_arguments)]
pub fn dlr_invariance_suite(
    phi: &Potential,
    manifold: &SiteManifold,
    proto: &Configuration,
    beta_sample: f64,
    beta_kernel: f64,
    params: &McmcParams,
    lambdas: &[SiteSet],
    observables: &[Observable],
    inner_order: usize,
    settings: &CheckSettings,
    meta: &ReportMeta,
) -> Result<CheckReport> {
    let start = Instant::now();
    let window_sites: SiteSet = proto.window().iter().collect();
    let collar = phi.range();
    for lambda in lambdas {
        if lambda.len() > 2 {
            return Err(Error::CostGuard(format!(
                "inner quadrature regions are limited to 2 sites, got {}",
                lambda.len()
            )));
        }
        if !proto.window().is_interior(lambda, collar) {
            return Err(Error::InvalidArgument(format!(
                "region {lambda:?} is not interior to the window (collar {collar})"
            )));
        }
    }
    let inner_manifold = SiteManifold::new(manifold.kind(), inner_order)?;

    let mut lambda_insts = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        lambda_insts.push(phi.instances_touching(lambda, proto)?);
    }
    let mut groups: Vec<EvalGroup> = Vec::new();
    let mut labels: Vec<(Observable, String)> = Vec::new();
    for (lambda, insts) in lambdas.iter().zip(lambda_insts) {
        let sites: Vec<SiteIndex> = lambda.iter().cloned().collect();
        let label = format!(
            "gibbs kernel on {{{}}}",
            sites
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        for f in observables {
            labels.push((f.clone(), label.clone()));
        }
        let fs: Vec<Observable> = observables.to_vec();
        let inner_nodes = inner_manifold.nodes().to_vec();
        // Properness short-circuit: the kernel is the identity on functions
        // supported outside the region, so their residual is exactly zero.
        let proper: Vec<bool> = fs
            .iter()
            .map(|f| f.support().intersection(lambda).next().is_none())
            .collect();
        groups.push(EvalGroup {
            arity: fs.len(),
            eval: Box::new(move |cfg: &Configuration, out: &mut [f64]| {
                for (j, f) in fs.iter().enumerate() {
                    out[j] = if proper[j] { 0.0 } else { f.evaluate(cfg)? };
                }
                if proper.iter().all(|p| *p) {
                    return Ok(());
                }
                let mut scratch = cfg.clone();
                let mut num = vec![Kahan::new(); fs.len()];
                let mut den = Kahan::new();
                crate::gibbs::tensor_scan(&mut scratch, &sites, &inner_nodes, |c, w, _| {
                    let mut h = 0.0;
                    for inst in &insts {
                        h += inst.energy(c)?;
                    }
                    let weight = w * (-beta_kernel * h).exp();
                    for (j, f) in fs.iter().enumerate() {
                        if !proper[j] {
                            num[j].add(weight * f.evaluate(c)?);
                        }
                    }
                    den.add(weight);
                    Ok(())
                })?;
                for j in 0..fs.len() {
                    if !proper[j] {
                        out[j] -= num[j].sum() / den.sum();
                    }
                }
                Ok(())
            }),
        });
    }

    let estimates = mcmc_group_estimates(
        phi,
        manifold,
        beta_sample,
        proto,
        &window_sites,
        params,
        &groups,
    )?;

    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for ((f, label), est) in labels.iter().zip(estimates.iter()) {
        rows.push(pair_result(f, label.clone(), est));
        verdicts.push(verdict_for(est, settings));
    }
    Ok(CheckReport {
        name: meta.name.clone(),
        model_hash: meta.model_hash.clone(),
        pairs: rows,
        verdict: aggregate(&verdicts),
        seed: meta.seed,
        runtime_sec: start.elapsed().as_secs_f64(),
        corpus_note: format!(
            "finite corpus spot check over {} observables x {} regions; \
             sampling beta = {beta_sample}, kernel beta = {beta_kernel}",
            observables.len(),
            lambdas.len()
        ),
    })
}

// ---------------------------------------------------------------------------
// Kernel compatibility
// ---------------------------------------------------------------------------

/// Compatibility of nested kernels: for every corpus observable, composing
/// the outer kernel with the inner one must reproduce the outer expectation.
pub fn compat_suite(
    outer: &GibbsKernel,
    inner: &GibbsKernel,
    eta: &Configuration,
    observables: &[Observable],
    settings: &CheckSettings,
    meta: &ReportMeta,
) -> Result<CheckReport> {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for f in observables {
        let direct = outer.expectation(f, eta)?;
        let composed = crate::gibbs::kernel_compose_expectation(outer, inner, f, eta)?;
        let est = Estimate {
            value: composed.value - direct.value,
            error: (composed.error + direct.error).max(f64::MIN_POSITIVE),
            kind: if matches!(outer.engine, Engine::Quadrature) {
                EstimateKind::QuadratureBound
            } else {
                EstimateKind::McStdErr
            },
            n_effective: composed.n_effective.min(direct.n_effective),
        };
        rows.push(pair_result(
            f,
            "compose(inner) vs direct".to_string(),
            &est,
        ));
        verdicts.push(verdict_for(&est, settings));
    }
    Ok(CheckReport {
        name: meta.name.clone(),
        model_hash: meta.model_hash.clone(),
        pairs: rows,
        verdict: aggregate(&verdicts),
        seed: meta.seed,
        runtime_sec: start.elapsed().as_secs_f64(),
        corpus_note: format!(
            "compatibility spot check over {} observables; inner region {:?} inside outer {:?}",
            observables.len(),
            inner.lambda,
            outer.lambda
        ),
    })
}

// ---------------------------------------------------------------------------
// Tilted functional
// ---------------------------------------------------------------------------

/// The tilted functional `psi(u) = E^phi_L[u * exp(beta H_L) | eta]` computed
/// with explicit exponential products (nothing is cancelled algebraically).
/// `psi` must annihilate every bracket, and its normalization
/// `psi(u)/psi(1)` must reproduce Liouville values.
pub fn tilted_annihilation_suite(
    kernel: &GibbsKernel,
    eta: &Configuration,
    pairs: &[(Observable, Observable)],
    settings: &CheckSettings,
    meta: &ReportMeta,
) -> Result<CheckReport> {
    let start = Instant::now();
    if !matches!(kernel.engine, Engine::Quadrature) {
        return Err(Error::CostGuard(
            "the tilted functional needs absolute normalization; use a quadrature kernel".into(),
        ));
    }
    // The annihilation mechanism integrates by parts over the region, so
    // both members of a pair must live on it.
    let total = pairs.len();
    let pairs: Vec<(Observable, Observable)> = pairs
        .iter()
        .filter(|(f, g)| {
            f.support().is_subset(&kernel.lambda) && g.support().is_subset(&kernel.lambda)
        })
        .cloned()
        .collect();
    let skipped = total - pairs.len();
    let sites: Vec<SiteIndex> = kernel.lambda.iter().cloned().collect();
    let insts = kernel.phi.instances_touching(&kernel.lambda, eta)?;
    let beta = kernel.beta;

    // Prepass for an overflow shift: exp(beta*H - c). The shift cancels in
    // psi-hat and is reported when nonzero.
    let mut max_bh = f64::NEG_INFINITY;
    {
        let mut cfg = eta.clone();
        crate::gibbs::tensor_scan(&mut cfg, &sites, kernel.manifold.nodes(), |c, _, _| {
            let mut h = 0.0;
            for inst in &insts {
                h += inst.energy(c)?;
            }
            max_bh = max_bh.max(beta * h);
            Ok(())
        })?;
    }
    let shift = if max_bh > 500.0 { max_bh - 100.0 } else { 0.0 };

    // One pass accumulating psi of every bracket, psi(1), psi(f) for the
    // distinct f's, and the partition normalizer.
    let mut distinct: Vec<Observable> = Vec::new();
    for (f, _) in &pairs {
        if !distinct.iter().any(|d| d == f) {
            distinct.push(f.clone());
        }
    }
    let moments = default_moment_observables(kernel.manifold.kind());
    for m in &moments {
        if !distinct.iter().any(|d| d == m) {
            distinct.push(m.clone());
        }
    }

    let mut psi_brackets = vec![Kahan::new(); pairs.len()];
    let mut psi_f = vec![Kahan::new(); distinct.len()];
    let mut psi_one = Kahan::new();
    let mut z_norm = Kahan::new();
    {
        let mut cfg = eta.clone();
        crate::gibbs::tensor_scan(&mut cfg, &sites, kernel.manifold.nodes(), |c, w, _| {
            let mut h = 0.0;
            for inst in &insts {
                h += inst.energy(c)?;
            }
            let gibbs = (-beta * h).exp();
            let tilt = (beta * h - shift).exp();
            let weight = w * gibbs * tilt;
            for (k, (f, g)) in pairs.iter().enumerate() {
                psi_brackets[k].add(weight * product_bracket(f, g, c)?);
            }
            for (k, f) in distinct.iter().enumerate() {
                psi_f[k].add(weight * f.evaluate(c)?);
            }
            psi_one.add(weight);
            z_norm.add(w * gibbs);
            Ok(())
        })?;
    }
    let z = z_norm.sum();

    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (k, (f, g)) in pairs.iter().enumerate() {
        let value = psi_brackets[k].sum() / z;
        let est = Estimate {
            value,
            error: 4.0 * f64::EPSILON * (1.0 + value.abs()),
            kind: EstimateKind::QuadratureBound,
            n_effective: kernel.manifold.nodes().len() as f64,
        };
        rows.push(PairResult {
            f: f.to_string(),
            g: format!("{{.,.}} with {g}"),
            residual: value,
            stderr: est.error,
            z: est.z_score(0.0),
            n_effective: est.n_effective,
        });
        verdicts.push(verdict_for(&est, settings));
    }

    // Normalized tilt against independently computed Liouville values.
    for (k, f) in distinct.iter().enumerate() {
        let tilt_mean = psi_f[k].sum() / psi_one.sum();
        let liouville = liouville_value(f, &kernel.manifold, eta)?;
        let value = tilt_mean - liouville;
        let est = Estimate {
            value,
            error: 4.0 * f64::EPSILON * (1.0 + value.abs()),
            kind: EstimateKind::QuadratureBound,
            n_effective: kernel.manifold.nodes().len() as f64,
        };
        rows.push(PairResult {
            f: f.to_string(),
            g: "normalized tilt vs liouville".into(),
            residual: value,
            stderr: est.error,
            z: est.z_score(0.0),
            n_effective: est.n_effective,
        });
        verdicts.push(verdict_for(&est, settings));
    }

    Ok(CheckReport {
        name: meta.name.clone(),
        model_hash: meta.model_hash.clone(),
        pairs: rows,
        verdict: aggregate(&verdicts),
        seed: meta.seed,
        runtime_sec: start.elapsed().as_secs_f64(),
        corpus_note: format!(
            "tilt computed with explicit exp(-beta H) * exp(+beta H) products; {} pairs \
             evaluated, {skipped} skipped (support outside region){}",
            pairs.len(),
            if shift != 0.0 {
                format!("; overflow shift {shift:.3} applied, cancels in the normalized functional")
            } else {
                String::new()
            }
        ),
    })
}

fn default_moment_observables(kind: ManifoldKind) -> Vec<Observable> {
    let texts: &[&str] = match kind {
        ManifoldKind::Sphere2 => &["sz(0)", "sz(0)^2"],
        ManifoldKind::Torus2 => &["cos(q(0))", "cos(q(0))^2"],
    };
    texts
        .iter()
        .map(|t| Observable::parse(t, kind).expect("builtin moment observable"))
        .collect()
}

/// Liouville expectation of `f` by a route that never touches the potential:
/// single-site supports integrate with the site rule directly; larger
/// supports use a zero-potential kernel.
fn liouville_value(
    f: &Observable,
    manifold: &SiteManifold,
    eta: &Configuration,
) -> Result<f64> {
    let support = f.support();
    if support.is_empty() {
        return f.evaluate(eta);
    }
    if support.len() == 1 {
        let site = *support.iter().next().unwrap();
        let mut cfg = eta.clone();
        return manifold.site_quadrature(|pt| {
            cfg.set(site, *pt).ok();
            f.evaluate(&cfg).unwrap_or(f64::NAN)
        });
    }
    let zero = Potential::zero(f.kind(), support.iter().next().unwrap().dim());
    let kernel = GibbsKernel::quadrature(zero, manifold.clone(), support.clone(), 1.0)?;
    Ok(kernel.expectation(f, eta)?.value)
}

// ---------------------------------------------------------------------------
// Quasi-local convergence probe
// ---------------------------------------------------------------------------

/// A quasi-local function given as a norm-convergent series of local terms.
/// Construction rejects series whose radius-shell masses fail to decay
/// geometrically.
#[derive(Clone, Debug)]
pub struct QuasilocalSeries {
    terms: Vec<(f64, Observable)>,
}

impl QuasilocalSeries {
    pub fn new(terms: Vec<(f64, Observable)>, manifold: &SiteManifold) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty series".into()));
        }
        let grid = SiteManifold::new(manifold.kind(), 8)?;
        let mut shells: BTreeMap<i64, f64> = BTreeMap::new();
        for (c, t) in &terms {
            let sup = sup_abs(t, &grid)?;
            let radius = t
                .support()
                .iter()
                .map(|s| s.norm_inf())
                .max()
                .unwrap_or(0);
            *shells.entry(radius).or_insert(0.0) += c.abs() * sup;
        }
        let masses: Vec<(i64, f64)> = shells.into_iter().filter(|(_, m)| *m > 0.0).collect();
        // The first transition is exempt: shell cardinality jumps between
        // radius 0 and 1. After that, shell masses must decay geometrically.
        for w in masses.windows(2).skip(1) {
            let (r0, m0) = w[0];
            let (r1, m1) = w[1];
            let allowed = m0 * 0.99f64.powi((r1 - r0) as i32);
            if m1 > allowed {
                return Err(Error::DivergentSeries(format!(
                    "shell mass does not decay geometrically: radius {r0} -> {m0:.3e}, \
                     radius {r1} -> {m1:.3e}"
                )));
            }
        }
        Ok(QuasilocalSeries { terms })
    }

    /// The series `sum over |i| <= n_max of base^|i| * sz(i)` (or cos(q(i))
    /// on the torus).
    pub fn exponential_profile(
        base: f64,
        n_max: i64,
        manifold: &SiteManifold,
    ) -> Result<Self> {
        let mut terms = Vec::new();
        for i in -n_max..=n_max {
            let text = match manifold.kind() {
                ManifoldKind::Sphere2 => format!("sz({i})"),
                ManifoldKind::Torus2 => format!("cos(q({i}))"),
            };
            let obs = Observable::parse(&text, manifold.kind())?;
            terms.push((base.powi(i.unsigned_abs() as i32), obs));
        }
        QuasilocalSeries::new(terms, manifold)
    }

    pub fn terms(&self) -> &[(f64, Observable)] {
        &self.terms
    }
}

fn sup_abs(f: &Observable, grid: &SiteManifold) -> Result<f64> {
    let sites: Vec<SiteIndex> = f.support().iter().cloned().collect();
    if sites.is_empty() {
        let w = crate::lattice::Window::from_shape(&[1])?;
        let cfg = Configuration::filled(
            w,
            crate::config::Boundary::Free,
            default_point(grid.kind()),
        );
        return Ok(f.evaluate(&cfg)?.abs());
    }
    let window = bounding_box(f.support())?;
    let mut cfg = Configuration::filled(
        window,
        crate::config::Boundary::Free,
        default_point(grid.kind()),
    );
    let mut sup: f64 = 0.0;
    let nodes = grid.nodes().to_vec();
    crate::gibbs::tensor_scan(&mut cfg, &sites, &nodes, |c, _, _| {
        sup = sup.max(f.evaluate(c)?.abs());
        Ok(())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d);
    for _ in 0..2_000 {
        for s in &sites {
            cfg.set(*s, grid.uniform_sample(&mut rng))?;
        }
        sup = sup.max(f.evaluate(&cfg)?.abs());
    }
    Ok(sup)
}

fn default_point(kind: ManifoldKind) -> SitePoint {
    match kind {
        ManifoldKind::Sphere2 => SitePoint::north(),
        ManifoldKind::Torus2 => SitePoint::Torus { q: 0.0, p: 0.0 },
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GapEstimate {
    pub radius: i64,
    pub gap: f64,
}

/// Sup-norm gaps between the series and its window truncations
/// `f_n(w) = f(w on [-n,n]^d, eta outside)`, estimated by grid-plus-sample
/// maximization per term. The estimate is exactly non-increasing in the
/// window radius.
pub fn quasilocal_convergence_probe(
    series: &QuasilocalSeries,
    eta: &Configuration,
    radii: &[i64],
    manifold: &SiteManifold,
) -> Result<Vec<GapEstimate>> {
    let grid = SiteManifold::new(manifold.kind(), 8)?;
    // Per-term sup of |t(w) - t(eta)| over the term's own sites.
    let mut gap_sup = Vec::with_capacity(series.terms.len());
    for (_, t) in &series.terms {
        let t_eta = t.evaluate(eta)?;
        let sites: Vec<SiteIndex> = t.support().iter().cloned().collect();
        if sites.is_empty() {
            gap_sup.push(0.0);
            continue;
        }
        let window = bounding_box(t.support())?;
        let mut cfg = Configuration::filled(
            window,
            crate::config::Boundary::Free,
            default_point(grid.kind()),
        );
        let mut sup: f64 = 0.0;
        let nodes = grid.nodes().to_vec();
        crate::gibbs::tensor_scan(&mut cfg, &sites, &nodes, |c, _, _| {
            sup = sup.max((t.evaluate(c)? - t_eta).abs());
            Ok(())
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(0xA7);
        for _ in 0..10_000 {
            for s in &sites {
                cfg.set(*s, manifold.uniform_sample(&mut rng))?;
            }
            sup = sup.max((t.evaluate(&cfg)? - t_eta).abs());
        }
        gap_sup.push(sup);
    }

    let mut out = Vec::with_capacity(radii.len());
    for &n in radii {
        let mut gap = 0.0;
        for (k, (c, t)) in series.terms.iter().enumerate() {
            let inside = t.support().iter().all(|s| s.norm_inf() <= n);
            if !inside {
                gap += c.abs() * gap_sup[k];
            }
        }
        out.push(GapEstimate { radius: n, gap });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Corpus files
// ---------------------------------------------------------------------------

/// A versioned list of observable pairs (for KMS / tilt suites) and single
/// observables (for DLR / compatibility suites).
#[derive(Clone, Debug)]
pub struct Corpus {
    pub name: String,
    pub manifold: ManifoldKind,
    pub dim: usize,
    pub pairs: Vec<(Observable, Observable)>,
    pub observables: Vec<Observable>,
}

#[derive(Deserialize)]
struct CorpusFile {
    name: String,
    manifold: String,
    dimension: usize,
    #[serde(rename = "pair", default)]
    pairs: Vec<CorpusPair>,
    #[serde(rename = "observable", default)]
    observables: Vec<CorpusObservable>,
}

#[derive(Deserialize)]
struct CorpusPair {
    f: String,
    g: String,
}

#[derive(Deserialize)]
struct CorpusObservable {
    expr: String,
}

impl Corpus {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CorpusFile = toml::from_str(text)?;
        let kind = ManifoldKind::parse(&file.manifold)?;
        let mut pairs = Vec::new();
        for p in &file.pairs {
            pairs.push((
                Observable::parse(&p.f, kind)?,
                Observable::parse(&p.g, kind)?,
            ));
        }
        let mut observables = Vec::new();
        for o in &file.observables {
            observables.push(Observable::parse(&o.expr, kind)?);
        }
        for obs in pairs
            .iter()
            .flat_map(|(f, g)| [f, g])
            .chain(observables.iter())
        {
            if obs.dim() != 0 && obs.dim() != file.dimension {
                return Err(Error::InvalidArgument(format!(
                    "corpus `{}` declares dimension {} but `{obs}` uses {}-d sites",
                    file.name,
                    file.dimension,
                    obs.dim()
                )));
            }
        }
        Ok(Corpus {
            name: file.name,
            manifold: kind,
            dim: file.dimension,
            pairs,
            observables,
        })
    }

    /// Observables translated so site 0 maps to `anchor`.
    pub fn observables_at(&self, anchor: SiteIndex) -> Vec<Observable> {
        self.observables
            .iter()
            .map(|o| o.translate(anchor))
            .collect()
    }
}
