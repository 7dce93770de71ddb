use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diversity::{DiversityMeasure, MetricWeights};
use crate::error::{Error, Result};
use crate::fl::TrainConfig;
use crate::radio::{DeviceRanges, RadioParams};
use crate::scheduler::SchedulerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Das,
    Abs,
    Random,
    All,
}

impl SchedulerKind {
    pub const NAMES: [&'static str; 4] = ["das", "abs", "random", "all"];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Das => "das",
            SchedulerKind::Abs => "abs",
            SchedulerKind::Random => "random",
            SchedulerKind::All => "all",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "das" => Ok(SchedulerKind::Das),
            "abs" => Ok(SchedulerKind::Abs),
            "random" => Ok(SchedulerKind::Random),
            "all" => Ok(SchedulerKind::All),
            other => Err(Error::InvalidInput(format!(
                "unknown scheduler {other:?}, expected one of: {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

fn default_num_devices() -> usize {
    100
}

fn default_max_rounds() -> usize {
    50
}

fn default_target_accuracy() -> f64 {
    1.0
}

fn default_scheduler() -> SchedulerKind {
    SchedulerKind::Das
}

/// The `[sim]` section. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Number of devices `K`.
    #[serde(default = "default_num_devices")]
    pub num_devices: usize,
    /// Round cap `r_max`.
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_target_accuracy")]
    pub target_accuracy: f64,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerKind,
    /// Devices per round for `abs` and `random`. When absent: the
    /// scheduler's `max_devices` if set, else a tenth of `K` (at least `N`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select_count: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Idx,
}

/// The `[data]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub feature_dim: usize,
    pub cluster_spread: f64,
    pub shard_size: usize,
    pub min_shards: usize,
    pub max_shards: usize,
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            images_path: None,
            labels_path: None,
            num_classes: 10,
            samples_per_class: 6000,
            feature_dim: 32,
            cluster_spread: 0.35,
            shard_size: 50,
            min_shards: 1,
            max_shards: 30,
            test_fraction: 0.1,
        }
    }
}

/// The `[diversity]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiversityConfig {
    pub measure: DiversityMeasure,
    pub gamma_diversity: f64,
    pub gamma_size: f64,
    pub gamma_age: f64,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        let w = MetricWeights::default();
        Self {
            measure: DiversityMeasure::default(),
            gamma_diversity: w.gamma_diversity,
            gamma_size: w.gamma_size,
            gamma_age: w.gamma_age,
        }
    }
}

impl DiversityConfig {
    pub fn weights(&self) -> MetricWeights {
        MetricWeights { gamma_diversity: self.gamma_diversity, gamma_size: self.gamma_size, gamma_age: self.gamma_age }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub sim: SimParams,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub devices: DeviceRanges,
    #[serde(default)]
    pub fl: TrainConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub diversity: DiversityConfig,
}

impl SimConfig {
    /// Defaults everywhere except the seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            sim: SimParams {
                num_devices: default_num_devices(),
                max_rounds: default_max_rounds(),
                target_accuracy: default_target_accuracy(),
                scheduler: default_scheduler(),
                select_count: None,
                seed,
            },
            radio: RadioParams::default(),
            devices: DeviceRanges::default(),
            fl: TrainConfig::default(),
            scheduler: SchedulerConfig::default(),
            data: DataConfig::default(),
            diversity: DiversityConfig::default(),
        }
    }

    /// Devices per round for the `abs` and `random` baselines.
    pub fn select_count(&self) -> usize {
        self.sim.select_count.unwrap_or_else(|| {
            self.scheduler
                .max_devices
                .unwrap_or((self.sim.num_devices / 10).max(self.scheduler.min_devices))
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.sim.num_devices;
        if k == 0 {
            return Err(Error::InvalidInput("sim.num_devices must be at least 1".into()));
        }
        self.scheduler.validate()?;
        if self.scheduler.min_devices > k {
            return Err(Error::InvalidInput(format!(
                "scheduler.min_devices ({}) exceeds sim.num_devices ({k})",
                self.scheduler.min_devices
            )));
        }
        if self.sim.max_rounds == 0 {
            return Err(Error::InvalidInput("sim.max_rounds must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sim.target_accuracy) {
            return Err(Error::InvalidInput(format!(
                "sim.target_accuracy must lie in [0, 1], got {}",
                self.sim.target_accuracy
            )));
        }
        let m = self.select_count();
        if matches!(self.sim.scheduler, SchedulerKind::Abs | SchedulerKind::Random) && (m == 0 || m > k) {
            return Err(Error::InvalidInput(format!("sim.select_count must lie in [1, {k}], got {m}")));
        }
        self.radio.validate()?;
        self.devices.validate()?;
        self.fl.validate()?;
        self.diversity.weights().validate()?;
        let d = &self.data;
        if d.shard_size == 0 || d.min_shards == 0 || d.min_shards > d.max_shards {
            return Err(Error::InvalidInput("data needs shard_size >= 1 and 1 <= min_shards <= max_shards".into()));
        }
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return Err(Error::InvalidInput(format!("data.test_fraction must lie in (0, 1), got {}", d.test_fraction)));
        }
        match d.source {
            DataSource::Synthetic => {
                if d.num_classes == 0 || d.samples_per_class == 0 || d.feature_dim == 0 {
                    return Err(Error::InvalidInput("synthetic data sizes must be positive".into()));
                }
            }
            DataSource::Idx => {
                if d.images_path.is_none() || d.labels_path.is_none() {
                    return Err(Error::InvalidInput("data.source = \"idx\" needs images_path and labels_path".into()));
                }
            }
        }
        Ok(())
    }
}
