//! JSON run configurations. Unknown keys are rejected; relative paths are
//! resolved against the directory of the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use edgewalk_core::attacks::Attack;
use edgewalk_core::eval::{TrainMode, MNIST_D_UPP};
use edgewalk_core::models::{make_two_moons, Dataset, Toy2DModel};
use edgewalk_core::QuantGrid;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::idx::load_idx;
use crate::Error;

/// Where examples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
    /// Generated from the run seed.
    TwoMoons { count: usize, noise: f64 },
}

impl DatasetSpec {
    pub fn resolve(&mut self, base: &Path) {
        if let DatasetSpec::Idx { images, labels, .. } = self {
            *images = base.join(&*images);
            *labels = base.join(&*labels);
        }
    }

    pub fn load(&self, seed: u64) -> Result<Dataset, Error> {
        match self {
            DatasetSpec::Idx {
                images,
                labels,
                limit,
            } => Ok(load_idx(images, labels, *limit)?),
            DatasetSpec::TwoMoons { count, noise } => Ok(make_two_moons(*count, *noise, seed)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialSection {
    pub attack: Attack,
    pub epochs: usize,
    #[serde(default)]
    pub mode: TrainMode,
    /// Per-epoch SGD settings; defaults to the clean-training ones.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    pub data: DatasetSpec,
    /// Held-out set; without it the last `holdout` examples of `data` are held out.
    #[serde(default)]
    pub test: Option<DatasetSpec>,
    #[serde(default)]
    pub holdout: usize,
    pub train: SgdSection,
    #[serde(default)]
    pub adversarial: Option<AdversarialSection>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchRunConfig {
    pub model: PathBuf,
    pub data: DatasetSpec,
    pub attack: Attack,
    /// Target distortions for aggregation over several runs.
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default = "default_d_upp")]
    pub d_upp: f64,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl RhoGrid {
    /// `count` evenly spaced values from `start` to `stop` inclusive.
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            c => (0..c)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (c - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantpredRunConfig {
    pub n: usize,
    pub delta: f64,
    #[serde(default)]
    pub rhos: Option<Vec<f64>>,
    #[serde(default)]
    pub rho_grid: Option<RhoGrid>,
    /// Monte-Carlo samples per row; 0 omits the column.
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl QuantpredRunConfig {
    pub fn rho_values(&self) -> Result<Vec<f64>, Error> {
        match (&self.rhos, &self.rho_grid) {
            (Some(list), None) => Ok(list.clone()),
            (None, Some(grid)) => Ok(grid.values()),
            _ => Err(Error::Config(
                "give exactly one of `rhos` and `rho_grid`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace2dRunConfig {
    #[serde(default)]
    pub model: Toy2DModel,
    pub attack: Attack,
    pub start: [f64; 2],
    /// Points per axis of the probability grid.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_d_upp() -> f64 {
    MNIST_D_UPP
}

fn default_levels() -> u32 {
    QuantGrid::BYTE.levels()
}

fn default_resolution() -> usize {
    101
}

pub fn grid(levels: u32) -> Result<QuantGrid, Error> {
    QuantGrid::new(levels)
        .ok_or_else(|| Error::Config(format!("invalid number of levels {levels}")))
}

/// Reads and parses a configuration file.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Directory against which relative paths of `config_path` resolve.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

/// Command-line seed, else the configured one.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Option<u64> {
    flag.or(config)
}

/// Like [`resolve_seed`] but mandatory.
pub fn require_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, Error> {
    resolve_seed(flag, config)
        .ok_or_else(|| Error::Config("this command needs a seed (`--seed` or `seed`)".into()))
}
