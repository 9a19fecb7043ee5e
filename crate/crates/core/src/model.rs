//! The contract every recommender satisfies, and model construction from a
//! serializable recipe.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{negative_sample_with_catalog, Dataset, DatasetKind};
use crate::metrics::RankedList;
use crate::ncf::{NcfConfig, NcfModel, TargetMode};
use crate::seeding::{self, Stream};
use crate::svd_model::{SvdConfig, SvdRecommender};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    /// Set when the user or item was unknown and a fallback score was used.
    pub fallback: bool,
}

/// Anything trainable that scores (user, item) pairs.
pub trait Recommender: Send + Sync {
    fn kind(&self) -> ModelKind;

    fn is_trained(&self) -> bool;

    fn predict(&self, user_id: u64, item_id: u64) -> Prediction;

    /// Scores for one user over many items. Implementations may batch, but
    /// must return exactly `predict(user_id, item).value` for each item.
    fn score_items(&self, user_id: u64, items: &[u64]) -> Vec<f64> {
        items.iter().map(|&i| self.predict(user_id, i).value).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ncf,
    Svd,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Ncf => "ncf",
            ModelKind::Svd => "svd",
        })
    }
}

/// Candidates sorted by score descending, ties by ascending item id.
pub fn rank_items(model: &dyn Recommender, user_id: u64, candidates: &[u64]) -> Result<RankedList> {
    if !model.is_trained() {
        return Err(Error::NotTrained);
    }
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    let scores = model.score_items(user_id, candidates);
    Ok(RankedList::from_scores(
        user_id,
        candidates.iter().copied().zip(scores).collect(),
    ))
}

/// Descending score, ascending id. NaN sorts last.
pub(crate) fn by_score_then_id(a: &(u64, f64), b: &(u64, f64)) -> Ordering {
    match b.1.partial_cmp(&a.1) {
        Some(Ordering::Equal) | None => match (a.1.is_nan(), b.1.is_nan()) {
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            _ => a.0.cmp(&b.0),
        },
        Some(o) => o,
    }
}

/// Serializable recipe for training one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Ncf(NcfConfig),
    Svd(SvdConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Ncf(_) => ModelKind::Ncf,
            ModelSpec::Svd(_) => ModelKind::Svd,
        }
    }

    /// Trains on `train`, sizing embedding tables / matrix columns for the
    /// full `users` × `items` catalog so that test-only entities still get
    /// (untrained) parameters. `seed` drives every random choice.
    pub fn fit(&self, train: &Dataset, users: &[u64], items: &[u64], seed: u64) -> Result<Box<dyn Recommender>> {
        Ok(match self.fit_trained(train, users, items, seed)? {
            TrainedModel::Ncf(m) => Box::new(m),
            TrainedModel::Svd(m) => Box::new(m),
        })
    }

    /// As [`ModelSpec::fit`], keeping the concrete model.
    pub fn fit_trained(&self, train: &Dataset, users: &[u64], items: &[u64], seed: u64) -> Result<TrainedModel> {
        match self {
            ModelSpec::Svd(cfg) => Ok(TrainedModel::Svd(SvdRecommender::fit_with_catalog(train, users, items, cfg)?)),
            ModelSpec::Ncf(cfg) => {
                let cfg = NcfConfig {
                    seed,
                    ..cfg.clone()
                };
                let data = match (train.kind(), cfg.target) {
                    (DatasetKind::Explicit, TargetMode::Binary) => {
                        // Ratings are positives; negatives drawn from the catalog.
                        let neg_seed = seeding::derive(seed, Stream::Negatives, &[]);
                        negative_sample_with_catalog(&train.to_implicit(), items, cfg.negative_ratio, neg_seed)?
                    }
                    _ => train.clone(),
                };
                Ok(TrainedModel::Ncf(NcfModel::train_with_catalog(&data, users, items, &cfg)?))
            }
        }
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Ncf(NcfConfig::default())
    }
}

/// A fitted model of either family.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Ncf(NcfModel),
    Svd(SvdRecommender),
}

impl TrainedModel {
    pub fn as_recommender(&self) -> &dyn Recommender {
        match self {
            TrainedModel::Ncf(m) => m,
            TrainedModel::Svd(m) => m,
        }
    }
}
