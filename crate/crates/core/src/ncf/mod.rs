//! Neural collaborative filtering: GMF and MLP towers over separate
//! embedding tables, fused by a linear NeuMF layer with a sigmoid head and
//! trained on binary cross-entropy.

mod params;
mod train;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use params::{bce_with_logit, sigmoid, Example, NcfParameters};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, Interaction};
use crate::model::{ModelKind, Prediction, Recommender};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

/// What the sigmoid output is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Observed interactions are 1, sampled negatives 0.
    #[default]
    Binary,
    /// Explicit ratings min-max scaled into [0, 1]; predictions are mapped
    /// back onto the rating scale.
    ScaledRating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NcfConfig {
    pub latent_dim: usize,
    pub mlp_layers: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Sampled negatives per positive when the training data has none.
    pub negative_ratio: usize,
    pub optimizer: Optimizer,
    pub target: TargetMode,
}

impl Default for NcfConfig {
    fn default() -> Self {
        NcfConfig {
            latent_dim: 4,
            mlp_layers: vec![16, 8, 4],
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 10,
            seed: 0,
            negative_ratio: 4,
            optimizer: Optimizer::Sgd,
            target: TargetMode::Binary,
        }
    }
}

impl NcfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(msg.to_string()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1");
        }
        if self.mlp_layers.is_empty() || self.mlp_layers.contains(&0) {
            return bad("mlp_layers must be non-empty with widths >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.negative_ratio == 0 {
            return bad("negative_ratio must be at least 1");
        }
        Ok(())
    }

    /// Hex SHA-256 over the configuration and the fixed architectural
    /// choices (activation, loss, initialization).
    pub fn hash(&self) -> String {
        let body = serde_json::json!({
            "config": self,
            "activation": "relu",
            "loss": "bce",
            "init": ["uniform", INIT_SCALE],
        });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NcfModel {
    pub params: NcfParameters,
    pub config: NcfConfig,
    users: Vec<u64>,
    items: Vec<u64>,
    #[serde(skip)]
    user_index: HashMap<u64, usize>,
    #[serde(skip)]
    item_index: HashMap<u64, usize>,
    trained: bool,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
    /// Rating scale for [`TargetMode::ScaledRating`].
    rating_scale: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config_hash: String,
    model: NcfModel,
}

impl NcfModel {
    /// Untrained model with embedding rows for the given ids.
    pub fn new(users: &[u64], items: &[u64], config: &NcfConfig) -> Result<Self> {
        config.validate()?;
        let mut model = NcfModel {
            params: NcfParameters::zeros(users.len(), items.len(), config),
            config: config.clone(),
            users: users.to_vec(),
            items: items.to_vec(),
            user_index: HashMap::new(),
            item_index: HashMap::new(),
            trained: false,
            loss_history: Vec::new(),
            rating_scale: (0.0, 1.0),
        };
        model.reindex();
        if model.user_index.len() != users.len() || model.item_index.len() != items.len() {
            return Err(Error::invalid("duplicate ids in catalog"));
        }
        Ok(model)
    }

    /// Trains on the users and items present in `data`.
    pub fn train(data: &Dataset, config: &NcfConfig) -> Result<Self> {
        let users: Vec<u64> = data.users().collect();
        let items: Vec<u64> = data.items().collect();
        Self::train_with_catalog(data, &users, &items, config)
    }

    /// Trains with embedding rows for every catalog id; ids absent from
    /// `data` keep their initial values.
    pub fn train_with_catalog(data: &Dataset, users: &[u64], items: &[u64], config: &NcfConfig) -> Result<Self> {
        let mut model = Self::new(users, items, config)?;
        train::fit(&mut model, data)?;
        Ok(model)
    }

    pub(crate) fn reindex(&mut self) {
        self.user_index = self.users.iter().enumerate().map(|(p, &u)| (u, p)).collect();
        self.item_index = self.items.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    }

    pub fn users(&self) -> &[u64] {
        &self.users
    }

    pub fn items(&self) -> &[u64] {
        &self.items
    }

    pub fn user_index(&self, id: u64) -> Option<usize> {
        self.user_index.get(&id).copied()
    }

    pub fn item_index(&self, id: u64) -> Option<usize> {
        self.item_index.get(&id).copied()
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    /// Maps interactions to dense examples with the configured targets.
    pub fn examples(&self, rows: &[Interaction]) -> Result<Vec<Example>> {
        let (lo, hi) = self.rating_scale;
        rows.iter()
            .map(|it| {
                let user = self.user_index(it.user_id).ok_or(Error::NotFound { kind: "user", id: it.user_id })?;
                let item = self.item_index(it.item_id).ok_or(Error::NotFound { kind: "item", id: it.item_id })?;
                let target = match self.config.target {
                    TargetMode::Binary => f64::from(u8::from(it.is_positive())),
                    TargetMode::ScaledRating => ((it.rating - lo) / (hi - lo)).clamp(0.0, 1.0),
                };
                Ok(Example { user, item, target })
            })
            .collect()
    }

    /// Mean loss and its analytic gradient over `batch`.
    pub fn gradient(&self, batch: &[Interaction]) -> Result<(f64, NcfParameters)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        Ok(self.params.gradient(&self.examples(batch)?))
    }

    /// Raw sigmoid output, or `None` for ids outside the catalog.
    pub fn forward(&self, user_id: u64, item_id: u64) -> Option<f64> {
        Some(self.params.forward(self.user_index(user_id)?, self.item_index(item_id)?))
    }

    fn output_to_value(&self, p: f64) -> f64 {
        match self.config.target {
            TargetMode::Binary => p,
            TargetMode::ScaledRating => self.rating_scale.0 + p * (self.rating_scale.1 - self.rating_scale.0),
        }
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let ck = Checkpoint {
            config_hash: self.config.hash(),
            model: self.clone(),
        };
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer(&mut f, &ck)?;
        f.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.config_hash != ck.model.config.hash() {
            return Err(Error::Validation("checkpoint config hash mismatch".into()));
        }
        let mut model = ck.model;
        model.reindex();
        Ok(model)
    }

    /// `epoch,loss` rows, epochs counted from 1.
    pub fn write_loss_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "loss"])?;
        for (e, loss) in self.loss_history.iter().enumerate() {
            w.write_record([(e + 1).to_string(), loss.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Recommender for NcfModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Ncf
    }

    fn is_trained(&self) -> bool {
        self.trained
    }

    fn predict(&self, user_id: u64, item_id: u64) -> Prediction {
        match self.forward(user_id, item_id) {
            Some(p) => Prediction {
                value: self.output_to_value(p),
                fallback: false,
            },
            None => Prediction {
                value: self.output_to_value(0.5),
                fallback: true,
            },
        }
    }

    fn score_items(&self, user_id: u64, items: &[u64]) -> Vec<f64> {
        let Some(u) = self.user_index(user_id) else {
            return vec![self.output_to_value(0.5); items.len()];
        };
        let user_proj = self.params.user_projection(u);
        items
            .iter()
            .map(|&id| match self.item_index(id) {
                Some(i) => {
                    let item_proj = self.params.item_projection(i);
                    self.output_to_value(sigmoid(self.params.logit_with(u, i, &user_proj, &item_proj)))
                }
                None => self.output_to_value(0.5),
            })
            .collect()
    }
}
