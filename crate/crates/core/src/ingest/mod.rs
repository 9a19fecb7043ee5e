//! Interaction datasets: loading, validation, splitting, negative sampling
//! and deletion views.

mod load;
mod sampling;
mod split;
mod stats;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use load::{load_amazon, load_movielens, AmazonFormat, Delimiter};
pub use sampling::{negative_sample, negative_sample_with_catalog};
pub use split::{split, SplitStrategy};
pub use stats::DatasetStats;

/// One (user, item, rating, timestamp) event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: u64,
    pub item_id: u64,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

impl Interaction {
    pub fn new(user_id: u64, item_id: u64, rating: f64) -> Self {
        Interaction {
            user_id,
            item_id,
            rating,
            timestamp: None,
        }
    }

    /// Sampled negatives of implicit data carry a rating of exactly zero.
    pub fn is_positive(&self) -> bool {
        self.rating > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Graded ratings on a fixed scale.
    Explicit,
    /// Binary feedback: 1.0 for observed pairs, 0.0 for sampled negatives.
    Implicit,
}

/// Which side of the interaction matrix an entity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    User,
    Item,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Item => "item",
        }
    }
}

impl std::fmt::Display for EntityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Immutable, indexed interaction collection.
///
/// Indices map each external id to the positions of its interactions, in
/// ascending position order. Every position appears in exactly one user list
/// and one item list.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    interactions: Vec<Interaction>,
    user_index: BTreeMap<u64, Vec<usize>>,
    item_index: BTreeMap<u64, Vec<usize>>,
    kind: DatasetKind,
    rating_scale: (f64, f64),
}

pub const MOVIELENS_SCALE: (f64, f64) = (1.0, 5.0);
pub const IMPLICIT_SCALE: (f64, f64) = (0.0, 1.0);

impl Dataset {
    /// Validates and indexes `interactions`. An empty list is accepted so that
    /// deletion views of single-entity datasets remain representable.
    pub fn new(
        interactions: Vec<Interaction>,
        kind: DatasetKind,
        rating_scale: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = rating_scale;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Validation(format!(
                "rating scale ({lo}, {hi}) is not a finite ordered pair"
            )));
        }
        let mut seen = HashSet::with_capacity(interactions.len());
        for (pos, it) in interactions.iter().enumerate() {
            if !it.rating.is_finite() {
                return Err(Error::Validation(format!(
                    "interaction {pos} has non-finite rating"
                )));
            }
            match kind {
                DatasetKind::Explicit if it.rating < lo || it.rating > hi => {
                    return Err(Error::Validation(format!(
                        "interaction {pos}: rating {} outside [{lo}, {hi}]",
                        it.rating
                    )));
                }
                DatasetKind::Implicit if it.rating != 0.0 && it.rating != 1.0 => {
                    return Err(Error::Validation(format!(
                        "interaction {pos}: implicit rating {} not in {{0, 1}}",
                        it.rating
                    )));
                }
                _ => {}
            }
            if !seen.insert((it.user_id, it.item_id)) {
                return Err(Error::Validation(format!(
                    "duplicate (user, item) pair ({}, {})",
                    it.user_id, it.item_id
                )));
            }
        }
        Ok(Self::build_unchecked(interactions, kind, rating_scale))
    }

    /// Indexes interactions already known to satisfy the invariants.
    fn build_unchecked(
        interactions: Vec<Interaction>,
        kind: DatasetKind,
        rating_scale: (f64, f64),
    ) -> Self {
        let mut user_index: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        let mut item_index: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (pos, it) in interactions.iter().enumerate() {
            user_index.entry(it.user_id).or_default().push(pos);
            item_index.entry(it.item_id).or_default().push(pos);
        }
        Dataset {
            interactions,
            user_index,
            item_index,
            kind,
            rating_scale,
        }
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn rating_scale(&self) -> (f64, f64) {
        self.rating_scale
    }

    pub fn n_users(&self) -> usize {
        self.user_index.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_index.len()
    }

    /// User ids in ascending order.
    pub fn users(&self) -> impl Iterator<Item = u64> + '_ {
        self.user_index.keys().copied()
    }

    /// Item ids in ascending order.
    pub fn items(&self) -> impl Iterator<Item = u64> + '_ {
        self.item_index.keys().copied()
    }

    pub fn entities(&self, kind: EntityKind) -> Vec<u64> {
        match kind {
            EntityKind::User => self.users().collect(),
            EntityKind::Item => self.items().collect(),
        }
    }

    pub fn contains(&self, kind: EntityKind, id: u64) -> bool {
        self.index(kind).contains_key(&id)
    }

    /// Positions of `user_id`'s interactions; empty when the user is absent.
    pub fn user_positions(&self, user_id: u64) -> &[usize] {
        self.user_index.get(&user_id).map_or(&[], Vec::as_slice)
    }

    pub fn item_positions(&self, item_id: u64) -> &[usize] {
        self.item_index.get(&item_id).map_or(&[], Vec::as_slice)
    }

    pub fn user_interactions(&self, user_id: u64) -> impl Iterator<Item = &Interaction> + '_ {
        self.user_positions(user_id)
            .iter()
            .map(move |&p| &self.interactions[p])
    }

    pub fn item_interactions(&self, item_id: u64) -> impl Iterator<Item = &Interaction> + '_ {
        self.item_positions(item_id)
            .iter()
            .map(move |&p| &self.interactions[p])
    }

    fn index(&self, kind: EntityKind) -> &BTreeMap<u64, Vec<usize>> {
        match kind {
            EntityKind::User => &self.user_index,
            EntityKind::Item => &self.item_index,
        }
    }

    /// Number of interactions per entity, ascending by id.
    pub fn counts(&self, kind: EntityKind) -> Vec<(u64, usize)> {
        self.index(kind)
            .iter()
            .map(|(&id, pos)| (id, pos.len()))
            .collect()
    }

    /// Interaction count of one entity, counting positives only.
    pub fn positive_count(&self, kind: EntityKind, id: u64) -> usize {
        self.index(kind).get(&id).map_or(0, |pos| {
            pos.iter()
                .filter(|&&p| self.interactions[p].is_positive())
                .count()
        })
    }

    pub fn has_negatives(&self) -> bool {
        self.interactions.iter().any(|it| !it.is_positive())
    }

    /// Same dataset restricted to interactions satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Interaction) -> bool) -> Dataset {
        let kept = self
            .interactions
            .iter()
            .filter(|it| keep(it))
            .copied()
            .collect();
        Self::build_unchecked(kept, self.kind, self.rating_scale)
    }

    /// X \ {u}: every interaction of `user_id` removed, the rest in order.
    pub fn delete_user(&self, user_id: u64) -> Result<Dataset> {
        if !self.user_index.contains_key(&user_id) {
            return Err(Error::NotFound {
                kind: "user",
                id: user_id,
            });
        }
        Ok(self.filter(|it| it.user_id != user_id))
    }

    /// X \ {i}: every interaction of `item_id` removed, the rest in order.
    pub fn delete_item(&self, item_id: u64) -> Result<Dataset> {
        if !self.item_index.contains_key(&item_id) {
            return Err(Error::NotFound {
                kind: "item",
                id: item_id,
            });
        }
        Ok(self.filter(|it| it.item_id != item_id))
    }

    pub fn delete(&self, kind: EntityKind, id: u64) -> Result<Dataset> {
        match kind {
            EntityKind::User => self.delete_user(id),
            EntityKind::Item => self.delete_item(id),
        }
    }

    /// Joint removal of several entities of one kind.
    pub fn delete_all(&self, kind: EntityKind, ids: &[u64]) -> Result<Dataset> {
        let index = self.index(kind);
        for &id in ids {
            if !index.contains_key(&id) {
                return Err(Error::NotFound {
                    kind: kind.as_str(),
                    id,
                });
            }
        }
        let drop: HashSet<u64> = ids.iter().copied().collect();
        Ok(self.filter(|it| {
            let id = match kind {
                EntityKind::User => it.user_id,
                EntityKind::Item => it.item_id,
            };
            !drop.contains(&id)
        }))
    }

    /// Binary view of explicit data: every rating becomes a positive (1.0).
    pub fn to_implicit(&self) -> Dataset {
        let interactions = self
            .interactions
            .iter()
            .map(|it| Interaction {
                rating: if it.is_positive() { 1.0 } else { 0.0 },
                ..*it
            })
            .collect();
        Self::build_unchecked(interactions, DatasetKind::Implicit, IMPLICIT_SCALE)
    }

    pub fn stats(&self) -> Result<DatasetStats> {
        DatasetStats::compute(self)
    }

    /// SHA-256 over the interaction list; identifies a dataset in reports.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(match self.kind {
            DatasetKind::Explicit => b"explicit",
            DatasetKind::Implicit => b"implicit",
        });
        for it in &self.interactions {
            hasher.update(it.user_id.to_le_bytes());
            hasher.update(it.item_id.to_le_bytes());
            hasher.update(it.rating.to_bits().to_le_bytes());
            hasher.update(it.timestamp.unwrap_or(i64::MIN).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Train/test partition of one dataset.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
    pub split_seed: u64,
    pub train_fraction: f64,
}

impl SplitDataset {
    /// Every item seen on either side, ascending.
    pub fn catalog_items(&self) -> Vec<u64> {
        let mut items: Vec<u64> = self.train.items().chain(self.test.items()).collect();
        items.sort_unstable();
        items.dedup();
        items
    }

    pub fn catalog_users(&self) -> Vec<u64> {
        let mut users: Vec<u64> = self.train.users().chain(self.test.users()).collect();
        users.sort_unstable();
        users.dedup();
        users
    }
}
