//! Run configuration: optional config file merged with command-line flags,
//! fully validated and hashed before any computation starts.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spinlab::{
    parse_site_set, Boundary, Configuration, ManifoldKind, McmcParams, Model, Proposal,
    SiteManifold, SitePoint, SiteSet, Window,
};
use std::path::Path;

/// Flat key/value run configuration. Every field can come from the config
/// file or be overridden by a flag; `resolve` fills defaults and validates.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub window: Option<String>,
    pub boundary: Option<String>,
    pub lambda: Option<String>,
    pub lambda_outer: Option<String>,
    pub corpus: Option<String>,
    pub engine: Option<String>,
    pub beta: Option<f64>,
    pub beta_sample: Option<f64>,
    pub quadrature_order: Option<usize>,
    pub inner_order: Option<usize>,
    pub sweeps: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub chains: Option<usize>,
    pub proposal: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub csv: Option<String>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("bad config file {}", path.display()))
    }

    /// Fields set in `other` win.
    pub fn overlaid(mut self, other: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => {
                $(if other.$f.is_some() { self.$f = other.$f; })*
            };
        }
        take!(
            model, window, boundary, lambda, lambda_outer, corpus, engine, beta, beta_sample,
            quadrature_order, inner_order, sweeps, burn_in, thin, chains, proposal, seed, out,
            csv, threads
        );
        self
    }
}

/// A validated run: the loaded model, concrete numeric parameters and the
/// configuration hash embedded in every output.
pub struct ResolvedRun {
    pub model: Model,
    pub window: Option<Window>,
    pub boundary_spec: String,
    pub lambda: Option<SiteSet>,
    pub lambda_outer: Option<SiteSet>,
    pub corpus_spec: String,
    pub engine: String,
    pub beta: f64,
    pub beta_sample: f64,
    pub quadrature_order: usize,
    pub inner_order: usize,
    pub mcmc: McmcParams,
    pub seed: u64,
    pub out: Option<String>,
    pub csv: Option<String>,
    pub threads: Option<usize>,
    pub hash: String,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn resolve(cfg: &RunConfig) -> Result<ResolvedRun> {
    let model_spec = cfg
        .model
        .clone()
        .ok_or_else(|| anyhow::anyhow!("no model given (use --model NAME|PATH)"))?;
    let model = spinlab::load_model(&model_spec)?;

    let window = match &cfg.window {
        Some(w) => {
            let win = Window::parse(w)?;
            if win.dim() != model.dim {
                bail!(
                    "window `{w}` is {}-dimensional but model `{}` is {}-dimensional",
                    win.dim(),
                    model.name,
                    model.dim
                );
            }
            Some(win)
        }
        None => None,
    };
    let lambda = match &cfg.lambda {
        Some(l) => {
            let set = parse_site_set(l)?;
            if set.iter().any(|s| s.dim() != model.dim) {
                bail!("lambda `{l}` does not match the model dimension {}", model.dim);
            }
            Some(set)
        }
        None => None,
    };
    let lambda_outer = match &cfg.lambda_outer {
        Some(l) => Some(parse_site_set(l)?),
        None => None,
    };

    let seed = cfg.seed.unwrap_or(0);
    let proposal = match cfg.proposal.as_deref() {
        None | Some("uniform") => Proposal::UniformSite,
        Some(p) if p.starts_with("cone:") => {
            let kappa: f64 = p["cone:".len()..]
                .parse()
                .with_context(|| format!("bad cone width in `{p}`"))?;
            Proposal::Cone { kappa }
        }
        Some(other) => bail!("unknown proposal `{other}` (uniform | cone:<kappa>)"),
    };
    let mcmc = McmcParams {
        sweeps: cfg.sweeps.unwrap_or(20_000),
        burn_in: cfg.burn_in.unwrap_or(1_000),
        thin: cfg.thin.unwrap_or(1),
        proposal,
        seed,
        chains: cfg.chains.unwrap_or(2),
    };

    let beta = cfg.beta.unwrap_or(model.beta);
    let resolved = ResolvedRun {
        window,
        boundary_spec: cfg.boundary.clone().unwrap_or_else(|| "free".into()),
        lambda,
        lambda_outer,
        corpus_spec: cfg.corpus.clone().unwrap_or_else(|| "default".into()),
        engine: cfg.engine.clone().unwrap_or_else(|| "quadrature".into()),
        beta,
        beta_sample: cfg.beta_sample.unwrap_or(beta),
        quadrature_order: cfg.quadrature_order.unwrap_or(24),
        inner_order: cfg.inner_order.unwrap_or(12),
        mcmc,
        seed,
        out: cfg.out.clone(),
        csv: cfg.csv.clone(),
        threads: cfg.threads,
        hash: String::new(),
        model,
    };
    Ok(finish_hash(resolved, cfg, &model_spec))
}

fn finish_hash(mut run: ResolvedRun, cfg: &RunConfig, model_spec: &str) -> ResolvedRun {
    // Canonical form: the resolved scalar parameters plus the model source
    // text, so renaming a file without changing content keeps the hash.
    let canon = serde_json::json!({
        "model": model_spec,
        "model_terms": run.model.potential.terms().iter().map(|t| {
            serde_json::json!({
                "expr": t.expr.to_string(),
                "coupling": t.coupling,
            })
        }).collect::<Vec<_>>(),
        "manifold": run.model.manifold.name(),
        "dimension": run.model.dim,
        "window": cfg.window,
        "boundary": run.boundary_spec,
        "lambda": cfg.lambda,
        "lambda_outer": cfg.lambda_outer,
        "corpus": run.corpus_spec,
        "engine": run.engine,
        "beta": run.beta,
        "beta_sample": run.beta_sample,
        "quadrature_order": run.quadrature_order,
        "inner_order": run.inner_order,
        "sweeps": run.mcmc.sweeps,
        "burn_in": run.mcmc.burn_in,
        "thin": run.mcmc.thin,
        "chains": run.mcmc.chains,
        "seed": run.seed,
    });
    run.hash = format!("{:016x}", fnv1a64(canon.to_string().as_bytes()));
    run
}

impl ResolvedRun {
    pub fn manifold(&self) -> Result<SiteManifold> {
        Ok(SiteManifold::new(
            self.model.manifold,
            self.quadrature_order,
        )?)
    }

    pub fn corpus(&self) -> Result<spinlab::Corpus> {
        let corpus = if self.corpus_spec == "default" {
            spinlab::default_corpus(self.model.manifold, self.model.dim)?
        } else {
            spinlab::load_corpus(&self.corpus_spec)?
        };
        if corpus.manifold != self.model.manifold {
            bail!(
                "corpus `{}` is over {} but the model lives on {}",
                corpus.name,
                corpus.manifold,
                self.model.manifold
            );
        }
        Ok(corpus)
    }

    fn fill_point(&self) -> SitePoint {
        match self.model.manifold {
            ManifoldKind::Sphere2 => SitePoint::north(),
            ManifoldKind::Torus2 => SitePoint::Torus { q: 0.0, p: 0.0 },
        }
    }

    fn boundary_point(&self) -> Result<SitePoint> {
        match (self.boundary_spec.as_str(), self.model.manifold) {
            ("north", ManifoldKind::Sphere2) => Ok(SitePoint::north()),
            ("south", ManifoldKind::Sphere2) => Ok(SitePoint::south()),
            ("zero", ManifoldKind::Torus2) => Ok(SitePoint::Torus { q: 0.0, p: 0.0 }),
            (other, kind) => bail!("boundary `{other}` is not a fixed value on {kind}"),
        }
    }

    /// Configuration carrying the boundary condition for a full-window run
    /// (sampling, MCMC checks).
    pub fn window_configuration(&self) -> Result<Configuration> {
        let window = self
            .window
            .clone()
            .ok_or_else(|| anyhow::anyhow!("this command needs --window"))?;
        match self.boundary_spec.as_str() {
            "periodic" => Ok(Configuration::filled(
                window,
                Boundary::Periodic,
                self.fill_point(),
            )),
            "free" => Ok(Configuration::filled(
                window,
                Boundary::Free,
                self.fill_point(),
            )),
            _ => {
                let pt = self.boundary_point()?;
                let collar = self.model.potential.range() + 2;
                Ok(Configuration::with_uniform_collar(
                    window,
                    collar,
                    self.fill_point(),
                    pt,
                ))
            }
        }
    }

    /// Boundary configuration around a quadrature region: the region's
    /// bounding box plus a fixed collar wide enough for the potential range
    /// and for corpus observables reaching past the region.
    pub fn region_configuration(&self, region: &SiteSet) -> Result<Configuration> {
        let bbox = spinlab::bounding_box(region)?;
        match self.boundary_spec.as_str() {
            "free" => Ok(Configuration::filled(
                bbox,
                Boundary::Free,
                self.fill_point(),
            )),
            "periodic" => {
                bail!("quadrature regions need a fixed or free boundary, not periodic")
            }
            _ => {
                let pt = self.boundary_point()?;
                let collar = self.model.potential.range() + 2;
                Ok(Configuration::with_uniform_collar(
                    bbox,
                    collar,
                    self.fill_point(),
                    pt,
                ))
            }
        }
    }
}
