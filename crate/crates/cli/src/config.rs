use std::path::Path;

use leafdbar::deck_sum::ProblemSpec;
use leafdbar::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmasConfig {
    pub samples: usize,
    pub n_max: u32,
}

impl Default for LemmasConfig {
    fn default() -> Self {
        Self { samples: 100_000, n_max: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub samples_per_annulus: usize,
    pub composed_samples: usize,
    pub n_max: u32,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { samples_per_annulus: 10_000, composed_samples: 1_000, n_max: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub t: f64,
    /// Deck word for the equivariance check, in side-pairing letters (capitals are inverses).
    pub word: String,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { t: 0.3, word: "a".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityConfig {
    pub delta: f64,
    pub center: Complex64,
    pub radius: f64,
    pub n_grid: u32,
    pub h: f64,
    pub t0: f64,
    pub radii: Vec<f64>,
    pub degree: usize,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        Self {
            delta: 0.02,
            center: Complex64::new(0.2, 0.1),
            radius: 0.4,
            n_grid: 5,
            h: 1.0 / 128.0,
            t0: 1.0,
            radii: vec![0.8, 0.4, 0.2, 0.1, 0.05],
            degree: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub t0: f64,
    pub radii: Vec<f64>,
    pub deltas: Vec<f64>,
    pub continuity: ContinuityConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            t0: 0.7,
            radii: vec![0.4, 0.2, 0.1, 0.05, 0.025],
            deltas: vec![0.2, 0.1, 0.05, 0.025],
            continuity: ContinuityConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub t: f64,
    pub tail_from: u32,
    pub samples: usize,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self { t: 0.3, tail_from: 6, samples: 500 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub lemmas: LemmasConfig,
    pub partition: PartitionConfig,
    pub solve: SolveConfig,
    pub sweep: SweepConfig,
    pub constants: ConstantsConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.lemmas.samples == 0 || self.lemmas.n_max == 0 {
            return Err(Error::Config("lemmas.samples and lemmas.n_max must be positive".into()));
        }
        if self.partition.samples_per_annulus == 0 || self.partition.n_max == 0 {
            return Err(Error::Config("partition.samples_per_annulus and partition.n_max must be positive".into()));
        }
        if self.sweep.radii.iter().chain(&self.sweep.deltas).any(|r| !(*r > 0.0)) {
            return Err(Error::Config("sweep radii and deltas must be positive".into()));
        }
        if self.constants.tail_from > self.problem.n_max {
            return Err(Error::Config(format!(
                "constants.tail_from = {} exceeds problem.n_max = {}",
                self.constants.tail_from, self.problem.n_max
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
