use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, SplitSpec};
use crate::hessian::HutchinsonConfig;
use crate::nn::{Activation, MlpArchitecture};
use crate::optim::OptimizerConfig;
use crate::slt::SgldConfig;
use crate::{Error, Result};

/// Environment variable naming the directory relative IDX paths resolve
/// against.
pub const DATA_DIR_ENV: &str = "DEGEN_DATA_DIR";

/// Hidden layers and activation; input and output sizes come from the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl ArchitectureSpec {
    pub fn resolve(&self, input_dim: usize, classes: usize) -> Result<MlpArchitecture> {
        MlpArchitecture::new(input_dim, self.hidden_layers.clone(), classes, self.activation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Synthetic {
        n: usize,
        input_dim: usize,
        classes: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
}

fn default_spread() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub source: DataSource,
    pub split: SplitSpec,
}

/// Training and validation sets for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
}

fn resolve_path(p: &Path) -> PathBuf {
    if p.is_relative() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            return Path::new(&dir).join(p);
        }
    }
    p.to_path_buf()
}

impl DataSpec {
    pub fn load(&self) -> Result<PreparedData> {
        let full = match &self.source {
            DataSource::Idx { images, labels } => data::load_idx(resolve_path(images), resolve_path(labels))?,
            DataSource::Synthetic {
                n,
                input_dim,
                classes,
                seed,
                spread,
            } => data::synthetic_classification_with_spread(*n, *input_dim, *classes, *seed, *spread)?,
        };
        let (train, val) = data::split(&full, &self.split)?;
        if train.is_empty() || val.is_empty() {
            return Err(Error::config(format!(
                "split produced {} training and {} validation examples; both must be non-empty",
                train.len(),
                val.len()
            )));
        }
        Ok(PreparedData { train, val })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Epoch cadence for the learning-coefficient estimate; `None` (written
    /// as 0 in files) disables it. A metric fires at epochs divisible by its
    /// cadence and at the final epoch.
    #[serde(default = "every_epoch", with = "cadence")]
    pub llc_every: Option<usize>,
    #[serde(default = "every_epoch", with = "cadence")]
    pub wbic_every: Option<usize>,
    #[serde(default = "every_epoch", with = "cadence")]
    pub trace_every: Option<usize>,
    /// Size of the fixed training subset the Hessian trace is measured on.
    #[serde(default = "default_metric_batch")]
    pub metric_batch_size: usize,
    #[serde(default)]
    pub sgld: SgldConfig,
    #[serde(default)]
    pub hutchinson: HutchinsonConfig,
}

fn every_epoch() -> Option<usize> {
    Some(1)
}

/// Cadences as plain integers, 0 meaning off.
mod cadence {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(v.unwrap_or(0) as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        Ok(Some(usize::deserialize(d)?).filter(|&k| k > 0))
    }
}

fn default_metric_batch() -> usize {
    512
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            llc_every: every_epoch(),
            wbic_every: every_epoch(),
            trace_every: every_epoch(),
            metric_batch_size: default_metric_batch(),
            sgld: SgldConfig::default(),
            hutchinson: HutchinsonConfig::default(),
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [
            ("llc_every", self.llc_every),
            ("wbic_every", self.wbic_every),
            ("trace_every", self.trace_every),
        ] {
            if c == Some(0) {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.metric_batch_size == 0 {
            return Err(Error::config("metric_batch_size must be at least 1"));
        }
        self.sgld.validate()?;
        self.hutchinson.validate()
    }

    pub(crate) fn fires(cadence: Option<usize>, epoch: usize, final_epoch: usize) -> bool {
        cadence.is_some_and(|k| epoch % k == 0 || epoch == final_epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub epochs: usize,
    pub architecture: ArchitectureSpec,
    pub optimizer: OptimizerConfig,
    pub data: DataSpec,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.metrics.validate()?;
        if self.architecture.hidden_layers.contains(&0) {
            return Err(Error::config("hidden layer widths must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        RunConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_optimizer(&self, optimizer: OptimizerConfig) -> Self {
        RunConfig {
            optimizer,
            ..self.clone()
        }
    }
}

/// Settings for `compare`, on top of the `[run]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub seeds: Vec<u64>,
    pub sgd: crate::optim::SgdConfig,
    pub ngd: crate::optim::NgdConfig,
    #[serde(default)]
    pub architectures: Vec<ArchitectureSpec>,
    /// Use the 1-2 layer by 64/128/256 unit grid instead of `architectures`.
    #[serde(default)]
    pub width_depth_grid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd_baseline: Option<crate::optim::SgdConfig>,
}

/// Settings for `fork`; `[run]` is the pretraining run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkSection {
    #[serde(default)]
    pub fork: super::experiments::ForkPoint,
    pub branch_a: OptimizerConfig,
    pub branch_b: OptimizerConfig,
    pub post_epochs: usize,
}

/// A whole configuration file: the base run plus optional experiment
/// sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fork: Option<ForkSection>,
}

impl ExperimentFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ExperimentFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        f.run.validate()?;
        Ok(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn compare_spec(&self) -> Result<super::experiments::CompareSpec> {
        let c = self
            .compare
            .as_ref()
            .ok_or_else(|| Error::config("configuration has no [compare] section"))?;
        Ok(super::experiments::CompareSpec {
            base: self.run.clone(),
            sgd: c.sgd.clone(),
            ngd: c.ngd.clone(),
            seeds: c.seeds.clone(),
            architectures: if c.width_depth_grid {
                ArchitectureSpec::width_depth_grid()
            } else {
                c.architectures.clone()
            },
        })
    }

    pub fn sweep_spec(&self) -> Result<super::experiments::SweepSpec> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::config("configuration has no [sweep] section"))?;
        Ok(super::experiments::SweepSpec {
            base: self.run.clone(),
            alphas: s.alphas.clone(),
            epsilons: s.epsilons.clone(),
            seeds: s.seeds.clone(),
            sgd_baseline: s.sgd_baseline.clone(),
        })
    }

    pub fn fork_spec(&self) -> Result<super::experiments::ForkSpec> {
        let f = self
            .fork
            .as_ref()
            .ok_or_else(|| Error::config("configuration has no [fork] section"))?;
        Ok(super::experiments::ForkSpec {
            pretrain: self.run.clone(),
            fork: f.fork.clone(),
            branch_a: f.branch_a.clone(),
            branch_b: f.branch_b.clone(),
            post_epochs: f.post_epochs,
        })
    }
}
