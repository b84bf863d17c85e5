//! spinlab: a numerical laboratory for classical lattice spin systems.
//!
//! The configuration space is a product of compact symplectic single-site
//! phase spaces (the unit sphere or the flat torus) over a finite window of
//! `Z^d`. The crate provides:
//!
//! - single-site manifolds with Liouville sampling, Poisson brackets and
//!   product quadrature rules ([`manifold`]);
//! - an expression system for smooth local observables with exact
//!   differentiation and the product Poisson bracket ([`observable`]);
//! - finite-range potentials, local Hamiltonians and their Hamiltonian
//!   vector field ([`potential`]);
//! - finite-region Gibbs kernels by quadrature or Metropolis MCMC, kernel
//!   composition and batch-means error bars ([`gibbs`]);
//! - executable equivalence experiments relating the Gibbs kernels to the
//!   bracket identity `E[{f,g}] = E[g X(f)]`, with negative controls
//!   ([`checks`]);
//! - bundled reference models and observable corpora ([`models`]).

pub mod checks;
pub mod config;
pub mod error;
pub mod gibbs;
pub mod lattice;
pub mod manifold;
pub mod models;
pub mod observable;
pub mod potential;
pub mod stats;

pub use checks::{
    compat_suite, dlr_invariance_suite, kms_mcmc_suite, kms_residual, kms_kernel_suite,
    quasilocal_convergence_probe, tilted_annihilation_suite, CheckReport, CheckSettings, Corpus,
    GapEstimate, PairResult, QuasilocalSeries, ReportMeta, Verdict,
};
pub use config::{Boundary, Configuration};
pub use error::{Error, Result};
pub use gibbs::{
    detailed_balance_audit, kernel_compose_expectation, mcmc_group_estimates, mcmc_sample_stream,
    Engine, Estimate, EstimateKind, EvalGroup, GibbsKernel, McmcParams, McmcRunStats, Proposal,
};
pub use lattice::{bounding_box, parse_site_set, SiteIndex, SiteSet, Window, MAX_DIM};
pub use manifold::{gauss_legendre, ManifoldKind, SiteManifold, SitePoint};
pub use models::{default_corpus, describe_model, list_models, load_corpus, load_model, ModelInfo};
pub use observable::{bracket_observable, product_bracket, site_bracket, CoordSym, Expr, Observable};
pub use potential::{x_phi_with, Model, Potential, PotentialTerm, TermInstance};
