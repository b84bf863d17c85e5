//! Bundled models and observable corpora.

use crate::checks::Corpus;
use crate::error::{Error, Result};
use crate::manifold::ManifoldKind;
use crate::potential::Model;

pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// Closed-form reference values where known; documentation, not an
    /// assertion.
    pub oracle_note: &'static str,
    pub toml: &'static str,
}

const MODELS: &[ModelInfo] = &[
    ModelInfo {
        name: "field",
        summary: "single-site field on the sphere: term -h*sz(i), h = coupling (default 1)",
        oracle_note: "<sz> = coth(h) - 1/h (Langevin function; h=1: 0.3130352855)",
        toml: include_str!("../assets/model_field.toml"),
    },
    ModelInfo {
        name: "heisenberg1d",
        summary: "classical Heisenberg chain: bond term -J*s(i).s(i+1), J = coupling",
        oracle_note: "free-boundary pair and long-chain nearest-neighbor correlation: \
                      <s0.s1> = coth(J) - 1/J (J=1: 0.3130352855)",
        toml: include_str!("../assets/model_heisenberg1d.toml"),
    },
    ModelInfo {
        name: "heisenberg2d",
        summary: "classical Heisenberg model on Z^2 with x- and y-bonds",
        oracle_note: "no closed form; validated against MCMC/quadrature cross-checks",
        toml: include_str!("../assets/model_heisenberg2d.toml"),
    },
    ModelInfo {
        name: "torus_field",
        summary: "single-site rotor potential on the torus: -h*cos(q(i))",
        oracle_note: "<cos q> = I1(h)/I0(h) (modified Bessel ratio; h=1: 0.4463899022)",
        toml: include_str!("../assets/model_torus_field.toml"),
    },
    ModelInfo {
        name: "rotor_chain",
        summary: "rotor chain on the torus: -J*cos(q(i)-q(i+1)) bonds plus -0.5*cos(p(i))",
        oracle_note: "no closed form for the chain; the p-marginal matches the \
                      single-site Bessel ratio at coupling 0.5",
        toml: include_str!("../assets/model_rotor_chain.toml"),
    },
];

const CORPORA: &[(&str, &str)] = &[
    ("sphere-d1-v1", include_str!("../assets/corpus_sphere_d1_v1.toml")),
    ("sphere-d2-v1", include_str!("../assets/corpus_sphere_d2_v1.toml")),
    ("torus-d1-v1", include_str!("../assets/corpus_torus_d1_v1.toml")),
];

pub fn list_models() -> &'static [ModelInfo] {
    MODELS
}

pub fn describe_model(name: &str) -> Result<String> {
    let info = MODELS
        .iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    Ok(format!(
        "{}\n  {}\n  oracle: {}\n\n{}",
        info.name, info.summary, info.oracle_note, info.toml
    ))
}

/// Load a bundled model by name or a model file by path.
pub fn load_model(name_or_path: &str) -> Result<Model> {
    if let Some(info) = MODELS.iter().find(|m| m.name == name_or_path) {
        return Model::from_toml_str(info.name, info.toml);
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(name_or_path);
        return Model::from_toml_str(name, &text);
    }
    Err(Error::UnknownModel(name_or_path.to_string()))
}

/// The default corpus for a manifold kind and lattice dimension.
pub fn default_corpus(kind: ManifoldKind, dim: usize) -> Result<Corpus> {
    let name = match (kind, dim) {
        (ManifoldKind::Sphere2, 1) => "sphere-d1-v1",
        (ManifoldKind::Sphere2, 2) => "sphere-d2-v1",
        (ManifoldKind::Torus2, 1) => "torus-d1-v1",
        _ => {
            return Err(Error::InvalidArgument(format!(
                "no bundled corpus for {kind} in dimension {dim}"
            )))
        }
    };
    load_corpus(name)
}

/// Load a bundled corpus by name or a corpus file by path.
pub fn load_corpus(name_or_path: &str) -> Result<Corpus> {
    if let Some((_, text)) = CORPORA.iter().find(|(n, _)| *n == name_or_path) {
        return Corpus::from_toml_str(text);
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        return Corpus::from_toml_str(&std::fs::read_to_string(path)?);
    }
    Err(Error::InvalidArgument(format!(
        "unknown corpus `{name_or_path}` (bundled: {})",
        CORPORA
            .iter()
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_has_at_least_four_models() {
        assert!(list_models().len() >= 4);
        for info in list_models() {
            let model = load_model(info.name).unwrap();
            assert_eq!(model.name, info.name);
        }
    }

    #[test]
    fn describe_documents_the_langevin_oracle() {
        let text = describe_model("field").unwrap();
        assert!(text.contains("coth(h) - 1/h"));
        assert!(matches!(
            describe_model("nope").unwrap_err(),
            Error::UnknownModel(_)
        ));
    }

    #[test]
    fn corpora_parse_and_are_large_enough() {
        for (name, _) in CORPORA {
            let corpus = load_corpus(name).unwrap();
            assert!(corpus.pairs.len() >= 10, "{name}");
            assert!(corpus.observables.len() >= 6, "{name}");
        }
        // The 1-D sphere corpus keeps at least ten single-site-f pairs so
        // singleton kernel regions still see a full suite.
        let c = load_corpus("sphere-d1-v1").unwrap();
        let singles = c
            .pairs
            .iter()
            .filter(|(f, _)| f.support().len() <= 1)
            .count();
        assert!(singles >= 10, "only {singles} single-site-f pairs");
    }
}
