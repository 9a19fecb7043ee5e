//! Latent-factor recommender on a truncated SVD of the imputed, row-centered
//! rating matrix.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, DatasetKind};
use crate::linalg::{truncated_svd, Matrix, SvdFactorization};
use crate::model::{ModelKind, Prediction, Recommender};

/// Residual tolerance (relative to σ₁) for the truncated factorization.
const SVD_TOL: f64 = 1e-10;

/// How unobserved cells are filled before factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    #[default]
    UserMean,
    GlobalMean,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdConfig {
    pub rank: usize,
    pub fill: FillPolicy,
    /// Subtract each user's mean before factorizing and add it back when
    /// predicting.
    pub center: bool,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            rank: 10,
            fill: FillPolicy::UserMean,
            center: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvdRecommender {
    pub factorization: SvdFactorization,
    /// Row offsets added back at prediction time (zero when not centering).
    pub user_means: Vec<f64>,
    pub fill: FillPolicy,
    pub k: usize,
    pub global_mean: f64,
    users: Vec<u64>,
    items: Vec<u64>,
    #[serde(skip)]
    user_pos: HashMap<u64, usize>,
    #[serde(skip)]
    item_pos: HashMap<u64, usize>,
    /// Requested rank when it exceeded the achievable rank.
    pub clamped_from: Option<usize>,
}

impl SvdRecommender {
    /// Fits on the users and items present in `train`.
    pub fn fit(train: &Dataset, cfg: &SvdConfig) -> Result<Self> {
        let users: Vec<u64> = train.users().collect();
        let items: Vec<u64> = train.items().collect();
        Self::fit_with_catalog(train, &users, &items, cfg)
    }

    /// Fits with rows for every id in `users` and columns for every id in
    /// `items`; ids without training ratings get imputed cells.
    pub fn fit_with_catalog(train: &Dataset, users: &[u64], items: &[u64], cfg: &SvdConfig) -> Result<Self> {
        if train.kind() != DatasetKind::Explicit {
            return Err(Error::invalid("SVD recommender requires explicit ratings"));
        }
        if train.is_empty() {
            return Err(Error::Empty);
        }
        if cfg.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        let user_pos: HashMap<u64, usize> = users.iter().enumerate().map(|(p, &u)| (u, p)).collect();
        let item_pos: HashMap<u64, usize> = items.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        if user_pos.len() != users.len() || item_pos.len() != items.len() {
            return Err(Error::invalid("duplicate ids in catalog"));
        }
        let (m, n) = (users.len(), items.len());

        let mut observed = vec![None; m * n];
        let mut sums = vec![(0.0, 0usize); m];
        let mut total = 0.0;
        for it in train.interactions() {
            let (Some(&u), Some(&i)) = (user_pos.get(&it.user_id), item_pos.get(&it.item_id)) else {
                return Err(Error::NotFound {
                    kind: "catalog entry",
                    id: if user_pos.contains_key(&it.user_id) { it.item_id } else { it.user_id },
                });
            };
            observed[u * n + i] = Some(it.rating);
            sums[u].0 += it.rating;
            sums[u].1 += 1;
            total += it.rating;
        }
        let global_mean = total / train.len() as f64;
        // Users without training ratings take the global mean.
        let row_means: Vec<f64> = sums
            .iter()
            .map(|&(s, c)| if c == 0 { global_mean } else { s / c as f64 })
            .collect();

        let offsets: Vec<f64> = if cfg.center { row_means.clone() } else { vec![0.0; m] };
        let a = Matrix::from_fn(m, n, |u, i| {
            let value = observed[u * n + i].unwrap_or(match cfg.fill {
                FillPolicy::UserMean => row_means[u],
                FillPolicy::GlobalMean => global_mean,
                FillPolicy::Zero => 0.0,
            });
            value - offsets[u]
        });

        // A zero centered matrix yields rank 0: predictions are the offsets.
        let factorization = truncated_svd(&a, cfg.rank.min(m.min(n)), SVD_TOL)?;
        let clamped_from = (factorization.rank < cfg.rank).then_some(cfg.rank);
        Ok(SvdRecommender {
            k: factorization.rank,
            factorization,
            user_means: offsets,
            fill: cfg.fill,
            global_mean,
            users: users.to_vec(),
            items: items.to_vec(),
            user_pos,
            item_pos,
            clamped_from,
        })
    }

    /// Rebuilds the id lookup tables after deserialization.
    pub fn reindex(&mut self) {
        self.user_pos = self.users.iter().enumerate().map(|(p, &u)| (u, p)).collect();
        self.item_pos = self.items.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    }

    fn user_vector(&self, u: usize) -> Vec<f64> {
        (0..self.k)
            .map(|t| self.factorization.singular_values[t] * self.factorization.u_factors[(u, t)])
            .collect()
    }

    fn item_score(&self, u: usize, weighted: &[f64], i: usize) -> f64 {
        let v = &self.factorization.v_factors;
        self.user_means[u] + weighted.iter().enumerate().map(|(t, w)| w * v[(i, t)]).sum::<f64>()
    }
}

impl Recommender for SvdRecommender {
    fn kind(&self) -> ModelKind {
        ModelKind::Svd
    }

    fn is_trained(&self) -> bool {
        true
    }

    fn predict(&self, user_id: u64, item_id: u64) -> Prediction {
        match (self.user_pos.get(&user_id), self.item_pos.get(&item_id)) {
            (Some(&u), Some(&i)) => Prediction {
                value: self.item_score(u, &self.user_vector(u), i),
                fallback: false,
            },
            _ => Prediction {
                value: self.global_mean,
                fallback: true,
            },
        }
    }

    fn score_items(&self, user_id: u64, items: &[u64]) -> Vec<f64> {
        let Some(&u) = self.user_pos.get(&user_id) else {
            return vec![self.global_mean; items.len()];
        };
        let weighted = self.user_vector(u);
        items
            .iter()
            .map(|id| match self.item_pos.get(id) {
                Some(&i) => self.item_score(u, &weighted, i),
                None => self.global_mean,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Interaction, IMPLICIT_SCALE, MOVIELENS_SCALE};

    fn explicit(rows: &[(u64, u64, f64)]) -> Dataset {
        Dataset::new(
            rows.iter().map(|&(u, i, r)| Interaction::new(u, i, r)).collect(),
            DatasetKind::Explicit,
            MOVIELENS_SCALE,
        )
        .unwrap()
    }

    #[test]
    fn exact_rank_two_recovery() {
        // fully observed; rows are combinations of two patterns
        let p = [[1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 1.0, 1.0]];
        let coef = [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5), (0.25, 0.75), (0.75, 0.25)];
        let mut rows = Vec::new();
        for (u, (a, b)) in coef.iter().enumerate() {
            for i in 0..4 {
                rows.push((u as u64, i as u64, a * p[0][i] + b * p[1][i]));
            }
        }
        let data = explicit(&rows);
        // centering adds the mean direction, so rank 2 of the centered matrix
        // still reproduces it exactly
        let model = SvdRecommender::fit(&data, &SvdConfig { rank: 2, ..Default::default() }).unwrap();
        for &(u, i, r) in &rows {
            let pred = model.predict(u, i);
            assert!(!pred.fallback);
            assert!((pred.value - r).abs() < 1e-6, "({u},{i}) {} vs {r}", pred.value);
        }
    }

    #[test]
    fn unseen_ids_fall_back_to_global_mean() {
        let data = explicit(&[(1, 1, 5.0), (1, 2, 3.0), (2, 1, 4.0)]);
        let model = SvdRecommender::fit(&data, &SvdConfig::default()).unwrap();
        let p = model.predict(99, 1);
        assert!(p.fallback);
        assert_eq!(p.value, 4.0);
        assert!(model.predict(1, 99).fallback);
        assert_eq!(model.score_items(99, &[1, 2]), vec![4.0, 4.0]);
    }

    #[test]
    fn rank_is_clamped() {
        let data = explicit(&[(1, 1, 5.0), (1, 2, 3.0), (2, 1, 4.0), (2, 2, 1.0)]);
        let model = SvdRecommender::fit(&data, &SvdConfig { rank: 10, ..Default::default() }).unwrap();
        assert!(model.k <= 2);
        assert_eq!(model.clamped_from, Some(10));
    }

    #[test]
    fn implicit_data_rejected() {
        let data = Dataset::new(vec![Interaction::new(1, 1, 1.0)], DatasetKind::Implicit, IMPLICIT_SCALE).unwrap();
        assert!(SvdRecommender::fit(&data, &SvdConfig::default()).is_err());
    }

    #[test]
    fn catalog_user_without_ratings_gets_global_mean() {
        let data = explicit(&[(1, 1, 5.0), (1, 2, 3.0), (2, 1, 4.0)]);
        let model = SvdRecommender::fit_with_catalog(&data, &[1, 2, 3], &[1, 2], &SvdConfig::default()).unwrap();
        let p = model.predict(3, 2);
        assert!(!p.fallback);
        assert!((p.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn batched_scores_match_predict() {
        let data = explicit(&[(1, 1, 5.0), (1, 2, 3.0), (2, 1, 4.0), (2, 3, 2.0), (3, 2, 1.0), (3, 3, 5.0)]);
        let model = SvdRecommender::fit(&data, &SvdConfig { rank: 2, ..Default::default() }).unwrap();
        for u in 1..=3 {
            let batch = model.score_items(u, &[1, 2, 3, 7]);
            for (idx, item) in [1, 2, 3, 7].iter().enumerate() {
                assert_eq!(batch[idx], model.predict(u, *item).value);
            }
        }
    }

    #[test]
    fn serde_round_trip_after_reindex() {
        let data = explicit(&[(1, 1, 5.0), (1, 2, 3.0), (2, 1, 4.0)]);
        let model = SvdRecommender::fit(&data, &SvdConfig { rank: 1, ..Default::default() }).unwrap();
        let mut back: SvdRecommender = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        back.reindex();
        assert_eq!(back.predict(1, 2), model.predict(1, 2));
    }
}
