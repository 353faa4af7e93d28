use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use skelmax::operators::Backend;
use skelmax::scaling::{Candidate, NormDomain};

pub const TOOL: &str = concat!("skelmax ", env!("CARGO_PKG_VERSION"));

/// Everything a run depends on. Loaded from a JSON file, then overridden by
/// command-line flags. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub q: f64,
    pub delta_list: Vec<f64>,
    pub candidates: Vec<Candidate>,
    pub seed: u64,
    pub backend: Backend,
    pub output_dir: PathBuf,
    pub width_factor: f64,
    pub norm_domain: NormDomain,
    pub tolerance: f64,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub lambdas: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 2,
            k: 1,
            p: 2.0,
            q: 8.0,
            delta_list: (4..=7).map(|j| 2f64.powi(-j)).collect(),
            candidates: vec![Candidate::SkeletonExtremizer],
            seed: 0,
            backend: Backend::Exact,
            output_dir: PathBuf::from("out"),
            width_factor: 1.0,
            norm_domain: NormDomain::Local,
            tolerance: 0.1,
            m_list: (6..=12).map(|j| 1usize << j).collect(),
            trials: 8,
            lambdas: vec![0.05, 0.1, 0.25, 0.5],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Checks shared by every subcommand that builds an operator.
    pub fn validate_operator(&self) -> Result<()> {
        if self.delta_list.is_empty() {
            bail!("delta_list is empty");
        }
        for &d in &self.delta_list {
            skelmax::operators::OperatorConfig::new(self.n, self.k, d)?
                .with_width_factor(self.width_factor)?
                .with_backend(self.backend)?;
        }
        Ok(())
    }

    pub fn validate_selection(&self) -> Result<()> {
        skelmax::geometry::check_dims(self.n, self.k)?;
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            bail!("m_list must be non-empty with positive entries");
        }
        if self.trials == 0 {
            bail!("trials must be positive");
        }
        Ok(())
    }

    pub fn meta(&self) -> Vec<(String, String)> {
        vec![
            ("tool".to_string(), TOOL.to_string()),
            ("config_hash".to_string(), self.hash()),
        ]
    }
}

/// `exact` or `quadrature:<h>`.
pub fn parse_backend(s: &str) -> Result<Backend, String> {
    match s.split_once(':') {
        None if s == "exact" => Ok(Backend::Exact),
        Some(("quadrature", h)) => h
            .parse::<f64>()
            .map(|h| Backend::Quadrature { h })
            .map_err(|e| format!("bad quadrature step {h:?}: {e}")),
        _ => Err(format!("expected `exact` or `quadrature:<h>`, got {s:?}")),
    }
}

pub fn parse_candidate(s: &str) -> Result<Candidate, String> {
    Candidate::parse(s).map_err(|e| e.to_string())
}
