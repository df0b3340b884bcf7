//! Run configuration files: one JSON document describing the dataset, the
//! two network shapes, the training hyperparameters, and output paths.
//! Documents are schema-validated up front; unknown keys are rejected.

use crate::data::{self, Dataset};
use crate::distill::DistillConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, MlpSpec, Role};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum DatasetSpec {
    Blobs {
        n: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        noise: f64,
        seed: u64,
    },
    Moons {
        n: usize,
        noise: f64,
        seed: u64,
    },
    Spirals {
        n: usize,
        #[serde(default = "default_turns")]
        turns: f64,
        noise: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_classes() -> usize {
    3
}
fn default_dim() -> usize {
    2
}
fn default_turns() -> f64 {
    1.5
}
fn default_test_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSpec,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

impl DatasetConfig {
    pub fn build(&self) -> Result<Dataset> {
        match &self.source {
            DatasetSpec::Blobs { n, classes, dim, noise, seed } => {
                data::gen_blobs(*n, *classes, *dim, *noise, *seed)
            }
            DatasetSpec::Moons { n, noise, seed } => data::gen_moons(*n, *noise, *seed),
            DatasetSpec::Spirals { n, turns, noise, seed } => {
                data::gen_spirals(*n, *turns, *noise, *seed)
            }
            DatasetSpec::Csv { path } => data::load_csv(path),
        }
    }

    /// Full dataset plus its stratified (train, test) split.
    pub fn build_split(&self) -> Result<(Dataset, Dataset, Dataset)> {
        let full = self.build()?;
        let (train, test) = data::split(&full, self.test_fraction, self.split_seed)?;
        Ok((full, train, test))
    }
}

/// Hidden widths and latent size; input and class counts come from the
/// dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub head_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![64],
            latent: 8,
            head_hidden: vec![],
            activation: Activation::Tanh,
        }
    }
}

impl NetworkConfig {
    pub fn encoder_spec(&self, input_dim: usize) -> Result<MlpSpec> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.latent);
        MlpSpec::new(sizes, self.activation, Role::Encoder)
    }

    pub fn head_spec(&self, n_classes: usize) -> Result<MlpSpec> {
        let mut sizes = vec![self.latent];
        sizes.extend_from_slice(&self.head_hidden);
        sizes.push(n_classes);
        MlpSpec::new(sizes, self.activation, Role::Head)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub model: Option<PathBuf>,
    pub log_csv: Option<PathBuf>,
    pub log_json: Option<PathBuf>,
}

fn default_student() -> NetworkConfig {
    NetworkConfig { hidden: vec![16], ..NetworkConfig::default() }
}

/// The on-disk run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub teacher: NetworkConfig,
    #[serde(default = "default_student")]
    pub student: NetworkConfig,
    #[serde(default)]
    pub train: DistillConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfigFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.dataset.test_fraction > 0.0 && self.dataset.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.dataset.test_fraction
            )));
        }
        if self.teacher.latent != self.student.latent {
            return Err(Error::Config(format!(
                "teacher latent dim {} must equal student latent dim {}",
                self.teacher.latent, self.student.latent
            )));
        }
        Ok(())
    }
}
