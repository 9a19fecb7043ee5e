use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use recinfluence::diagnostics::{EntitySubset, Experiment, SeedMode, SweepPlan};
use recinfluence::ingest::{load_amazon, load_movielens, AmazonFormat, Dataset, EntityKind, SplitStrategy};
use recinfluence::metrics::{EvalConfig, MetricName};
use recinfluence::model::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::InputError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// Tab-separated `user item rating timestamp`.
    #[default]
    Movielens,
    /// `user,item[,rating,timestamp]` reviews, treated as implicit feedback.
    Amazon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: DatasetFormat,
    pub amazon: AmazonFormat,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: PathBuf::from("data/ml-100k/u.data"),
            format: DatasetFormat::Movielens,
            amazon: AmazonFormat::default(),
        }
    }
}

impl DatasetConfig {
    pub fn load(&self) -> Result<Dataset> {
        let loaded = match self.format {
            DatasetFormat::Movielens => load_movielens(&self.path),
            DatasetFormat::Amazon => load_amazon(&self.path, self.amazon),
        };
        loaded.map_err(|e| InputError::new(format!("cannot load {}: {e}", self.path.display())).into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
    pub strategy: SplitStrategy,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.75,
            seed: 0,
            strategy: SplitStrategy::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub workers: usize,
    pub seed_mode: SeedMode,
    pub metric: MetricName,
    /// Sweep a uniform sample of this many entities instead of all.
    pub sample_size: Option<usize>,
    pub sample_seed: u64,
    /// Sweep exactly these ids (takes precedence over sampling).
    pub entities: Option<Vec<u64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            workers: 1,
            seed_mode: SeedMode::PerEntity,
            metric: MetricName::Map,
            sample_size: None,
            sample_seed: 0,
            entities: None,
        }
    }
}

/// The whole experiment description; a config file plus the dataset file
/// determine every report byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Master seed: baseline training and per-entity seed derivation.
    pub seed: u64,
    /// Negatives per positive sampled for implicit datasets.
    pub negative_ratio: usize,
    pub dataset: DatasetConfig,
    pub model: ModelSpec,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("out"),
            seed: 0,
            negative_ratio: 4,
            dataset: DatasetConfig::default(),
            model: ModelSpec::default(),
            split: SplitConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError::new(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| InputError::new(format!("invalid config {}: {e}", path.display())).into())
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            model: self.model.clone(),
            train_fraction: self.split.train_fraction,
            split_seed: self.split.seed,
            split_strategy: self.split.strategy,
            master_seed: self.seed,
            eval: self.eval,
            negative_ratio: self.negative_ratio,
        }
    }

    pub fn plan(&self, kind: EntityKind) -> SweepPlan {
        let subset = match (&self.sweep.entities, self.sweep.sample_size) {
            (Some(ids), _) => EntitySubset::List(ids.clone()),
            (None, Some(size)) => EntitySubset::Sample {
                size,
                seed: self.sweep.sample_seed,
            },
            (None, None) => EntitySubset::All,
        };
        SweepPlan {
            entity_kind: kind,
            subset,
            workers: self.sweep.workers,
            seed_mode: self.sweep.seed_mode,
            metric: self.sweep.metric,
        }
    }

    /// Digest of everything that affects results; the output location does not.
    pub fn hash(&self) -> Result<String> {
        let mut hashed = self.clone();
        hashed.output_dir = PathBuf::new();
        recinfluence::json_digest(&hashed).context("hashing config")
    }
}
