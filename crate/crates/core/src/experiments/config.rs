//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! workers = 1
//!
//! [model]
//! dim = 4
//! offspring = { 0 = "1/2", 2 = "1/2" }
//! step = "simple"            # or: steps = [{ v = [1, 0], p = "1/4" }, ...]
//!
//! [green]
//! method = "quadrature"      # or "convolution" with n_max
//! radius = 20
//! tol = 1e-6
//!
//! [sweep]
//! estimator = "visit"        # or "mean"
//! radii = [8, 12, 16, 24, 32]
//! direction = "axis"         # or "diagonal"
//! samples = 10000000
//! node_cap = 10000000
//! fit = "pure_power"
//! ```
//!
//! Weights are strings holding `p/q` fractions or decimals, kept exact, or
//! plain TOML floats.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::brw::DEFAULT_NODE_CAP;
use crate::distributions::{DistributionError, OffspringDistribution, StepDistribution, Weight};
use crate::green::GreenMethod;

use super::fit::FitMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("cannot read configuration: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum WeightValue {
    Text(String),
    Number(f64),
}

impl WeightValue {
    fn weight(&self) -> Result<Weight, ConfigError> {
        match self {
            WeightValue::Text(s) => s.parse().map_err(ConfigError::Invalid),
            WeightValue::Number(x) => Ok(Weight::Float(*x)),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StepAtom {
    pub v: Vec<i64>,
    pub p: WeightValue,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    pub offspring: BTreeMap<String, WeightValue>,
    /// `"simple"` for the nearest-neighbour walk.
    #[serde(default)]
    pub step: Option<String>,
    #[serde(default)]
    pub steps: Option<Vec<StepAtom>>,
}

impl ModelSpec {
    pub fn offspring(&self) -> Result<OffspringDistribution, ConfigError> {
        let atoms = self
            .offspring
            .iter()
            .map(|(k, w)| {
                let k: u32 = k
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("offspring key {k:?} is not a count")))?;
                Ok((k, w.weight()?))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(OffspringDistribution::from_weights(&atoms)?)
    }

    pub fn step(&self) -> Result<StepDistribution, ConfigError> {
        match (&self.step, &self.steps) {
            (Some(s), None) if s == "simple" => Ok(StepDistribution::simple(self.dim)?),
            (Some(s), None) => Err(ConfigError::Invalid(format!("unknown step law {s:?}"))),
            (None, Some(atoms)) => {
                let atoms = atoms
                    .iter()
                    .map(|a| Ok((a.v.clone(), a.p.weight()?)))
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                Ok(StepDistribution::from_weights(self.dim, &atoms)?)
            }
            _ => Err(ConfigError::Invalid("give exactly one of `step` and `steps`".into())),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GreenSpec {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_green_radius")]
    pub radius: i64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub n_max: Option<u64>,
}

fn default_method() -> String {
    "quadrature".into()
}
fn default_green_radius() -> i64 {
    20
}
fn default_tol() -> f64 {
    crate::green::DEFAULT_ABS_TOL
}

impl Default for GreenSpec {
    fn default() -> Self {
        Self {
            method: default_method(),
            radius: default_green_radius(),
            tol: default_tol(),
            n_max: None,
        }
    }
}

impl GreenSpec {
    pub fn method(&self) -> Result<GreenMethod, ConfigError> {
        self.method.parse().map_err(|e: crate::green::GreenError| ConfigError::Invalid(e.to_string()))
    }

    /// Tolerance for quadrature, n_max for convolution.
    pub fn accuracy(&self) -> Result<f64, ConfigError> {
        Ok(match self.method()? {
            GreenMethod::Quadrature => self.tol,
            GreenMethod::Convolution => self
                .n_max
                .ok_or_else(|| ConfigError::Invalid("convolution needs n_max".into()))? as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Visit,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Axis,
    Diagonal,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    #[serde(default)]
    pub radii: Vec<i64>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    pub samples: u64,
    #[serde(default = "default_cap")]
    pub node_cap: u64,
    #[serde(default)]
    pub fit: Option<String>,
}

fn default_estimator() -> Estimator {
    Estimator::Visit
}
fn default_direction() -> Direction {
    Direction::Axis
}
fn default_cap() -> u64 {
    DEFAULT_NODE_CAP
}

impl SweepSpec {
    /// Target for one grid entry: r·e_1 on the axis, (r, …, r) on the
    /// diagonal.
    pub fn target(&self, dim: usize, r: i64) -> Vec<i64> {
        match self.direction {
            Direction::Axis => {
                let mut t = vec![0; dim];
                t[0] = r;
                t
            }
            Direction::Diagonal => vec![r; dim],
        }
    }

    pub fn fit_mode(&self) -> Result<Option<FitMode>, ConfigError> {
        self.fit
            .as_deref()
            .map(|s| s.parse().map_err(|e: super::ExperimentError| ConfigError::Invalid(e.to_string())))
            .transpose()
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub model: ModelSpec,
    #[serde(default)]
    pub green: GreenSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// SHA-256 of the source text.
    #[serde(skip)]
    pub hash: String,
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.hash = hex::encode(Sha256::digest(text.as_bytes()));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Builds both laws and checks the grid.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let step = self.model.step()?;
        if step.dim() != self.model.dim {
            return Err(ConfigError::Invalid("step dimension differs from model.dim".into()));
        }
        self.model.offspring()?;
        self.green.method()?;
        self.green.accuracy()?;
        if let Some(s) = &self.sweep {
            if s.node_cap == 0 {
                return Err(ConfigError::Invalid("node_cap must be positive".into()));
            }
            if s.radii.iter().any(|&r| r < 0) {
                return Err(ConfigError::Invalid("radii must be nonnegative".into()));
            }
            s.fit_mode()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[model]
dim = 4
offspring = { 0 = "1/2", 2 = "1/2" }
step = "simple"

[sweep]
radii = [8, 12]
samples = 1000
fit = "pure_power"
"#;

    #[test]
    fn parses_sample() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.workers, 1);
        assert_eq!(c.model.step().unwrap().len(), 8);
        assert!(c.model.offspring().unwrap().exact_atoms().is_some());
        let s = c.sweep.as_ref().unwrap();
        assert_eq!(s.estimator, Estimator::Visit);
        assert_eq!(s.node_cap, DEFAULT_NODE_CAP);
        assert_eq!(s.target(4, 12), vec![12, 0, 0, 0]);
        assert_eq!(c.green.radius, 20);
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn explicit_steps() {
        let text = r#"
[model]
dim = 1
offspring = { 0 = 0.5, 2 = 0.5 }
steps = [{ v = [1], p = "2/3" }, { v = [-2], p = "1/3" }]
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert!(c.model.step().unwrap().exact_weights().is_some());
        assert!(c.model.offspring().unwrap().exact_atoms().is_none());
    }

    #[test]
    fn rejects_bad_configs() {
        let subcritical = SAMPLE.replace(r#"0 = "1/2", 2 = "1/2""#, r#"0 = "3/4", 2 = "1/4""#);
        assert!(matches!(RunConfig::from_toml(&subcritical), Err(ConfigError::Distribution(_))));
        assert!(matches!(RunConfig::from_toml("seed = "), Err(ConfigError::Parse(_))));
        let unknown = SAMPLE.replace("seed = 7", "seed = 7\ncolour = 1");
        assert!(matches!(RunConfig::from_toml(&unknown), Err(ConfigError::Parse(_))));
        let both = SAMPLE.replace(r#"step = "simple""#, "step = \"simple\"\nsteps = []");
        assert!(matches!(RunConfig::from_toml(&both), Err(ConfigError::Invalid(_))));
    }
}
