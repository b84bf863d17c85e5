//! Error type shared by all modules of the crate.

use crate::lattice::SiteIndex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown symbol `{symbol}` for manifold `{manifold}` at {line}:{col}")]
    UnknownSymbol {
        symbol: String,
        manifold: String,
        line: usize,
        col: usize,
    },

    #[error("site {site} not covered by window or boundary")]
    MissingSite { site: SiteIndex },

    #[error("non-finite integrand value {value} at quadrature node {node}")]
    NonFiniteIntegrand { node: String, value: f64 },

    #[error("non-finite energy change at site {site}; configuration: {dump}")]
    NonFiniteEnergy { site: SiteIndex, dump: String },

    #[error("cost guard violated: {0}")]
    CostGuard(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("divergent series spec: {0}")]
    DivergentSeries(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
