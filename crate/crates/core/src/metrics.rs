//! Ranking and accuracy metrics.
//!
//! Ranking metrics return `None` for a user whose relevance set is empty;
//! such users are left out of every ranking aggregate.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SplitDataset;
use crate::model::{by_score_then_id, Recommender};

/// A user's recommendations, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user_id: u64,
    pub items: Vec<u64>,
    pub scores: Vec<f64>,
}

impl RankedList {
    /// Sorts (item, score) pairs by score descending, ties by ascending id.
    pub fn from_scores(user_id: u64, mut scored: Vec<(u64, f64)>) -> Self {
        scored.sort_by(by_score_then_id);
        let (items, scores) = scored.into_iter().unzip();
        RankedList {
            user_id,
            items,
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Held-out truth for one user.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RelevanceSet {
    pub user_id: u64,
    pub relevant_items: BTreeSet<u64>,
    /// Gains for NDCG; every relevant item has a positive grade.
    pub graded_relevance: BTreeMap<u64, f64>,
}

impl RelevanceSet {
    /// Binary relevance: every listed item has grade 1.
    pub fn binary(user_id: u64, items: impl IntoIterator<Item = u64>) -> Self {
        let relevant_items: BTreeSet<u64> = items.into_iter().collect();
        let graded_relevance = relevant_items.iter().map(|&i| (i, 1.0)).collect();
        RelevanceSet {
            user_id,
            relevant_items,
            graded_relevance,
        }
    }

    pub fn graded(user_id: u64, grades: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let graded_relevance: BTreeMap<u64, f64> =
            grades.into_iter().filter(|&(_, g)| g > 0.0).collect();
        RelevanceSet {
            user_id,
            relevant_items: graded_relevance.keys().copied().collect(),
            graded_relevance,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.relevant_items.is_empty()
    }

    fn gain(&self, item: u64) -> f64 {
        if self.relevant_items.contains(&item) {
            self.graded_relevance.get(&item).copied().unwrap_or(1.0)
        } else {
            0.0
        }
    }
}

/// `(1/|R|) Σ_{k ≤ cutoff} P@k · rel(k)`. `None` when `truth` is empty.
pub fn average_precision(ranked: &RankedList, truth: &RelevanceSet, cutoff: Option<usize>) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let depth = cutoff.map_or(ranked.len(), |c| c.min(ranked.len()));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, item) in ranked.items[..depth].iter().enumerate() {
        if truth.relevant_items.contains(item) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(sum / truth.relevant_items.len() as f64)
}

/// Mean AP over users with a non-empty relevance set. Lists are aligned by
/// position.
pub fn mean_average_precision(
    all_ranked: &[RankedList],
    all_truth: &[RelevanceSet],
    cutoff: Option<usize>,
) -> Result<f64> {
    if all_ranked.len() != all_truth.len() {
        return Err(Error::invalid(format!(
            "{} ranked lists but {} relevance sets",
            all_ranked.len(),
            all_truth.len()
        )));
    }
    mean_of(
        all_ranked
            .iter()
            .zip(all_truth)
            .filter_map(|(r, t)| average_precision(r, t, cutoff)),
    )
    .ok_or(Error::NoEvaluableUsers)
}

/// DCG@cutoff with linear gains and `1/log2(rank + 1)` discount, over the
/// ideal DCG@cutoff of the relevant grades.
pub fn ndcg(ranked: &RankedList, truth: &RelevanceSet, cutoff: usize) -> Option<f64> {
    if truth.is_empty() || cutoff == 0 {
        return None;
    }
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranked
        .items
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(pos, &item)| truth.gain(item) * discount(pos + 1))
        .sum();
    let mut ideal: Vec<f64> = truth.relevant_items.iter().map(|&i| truth.gain(i)).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(pos, g)| g * discount(pos + 1))
        .sum();
    Some(dcg / idcg)
}

fn hits_at(ranked: &RankedList, truth: &RelevanceSet, k: usize) -> usize {
    ranked
        .items
        .iter()
        .take(k)
        .filter(|i| truth.relevant_items.contains(i))
        .count()
}

/// `|top-k ∩ R| / k`. The denominator stays `k` even when fewer than `k`
/// items were ranked; an empty relevance set contributes 0.
pub fn precision_at_k(ranked: &RankedList, truth: &RelevanceSet, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    hits_at(ranked, truth, k) as f64 / k as f64
}

/// `|top-k ∩ R| / |R|`; `None` when `truth` is empty.
pub fn recall_at_k(ranked: &RankedList, truth: &RelevanceSet, k: usize) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    Some(hits_at(ranked, truth, k) as f64 / truth.relevant_items.len() as f64)
}

/// `1 − Var(actual − predicted) / Var(actual)`, population variances.
pub fn explained_variance(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(predicted, actual, 2)?;
    let residual: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
    let var_actual = population_variance(actual);
    if var_actual == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(1.0 - population_variance(&residual) / var_actual)
}

pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(predicted, actual, 1)?;
    Ok(predicted.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / actual.len() as f64)
}

fn check_lengths(predicted: &[f64], actual: &[f64], min: usize) -> Result<()> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions, {} targets",
            predicted.len(),
            actual.len()
        )));
    }
    if actual.len() < min {
        return Err(Error::invalid(format!("need at least {min} values, got {}", actual.len())));
    }
    Ok(())
}

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// The seven evaluation measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub map: f64,
    pub map_at_k: f64,
    pub ndcg: f64,
    pub precision_at_k: f64,
    pub recall_at_k: f64,
    /// NaN when undefined (constant targets); serialized as `null`.
    #[serde(with = "crate::serde_nan")]
    pub explained_variance: f64,
    pub mae: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    #[default]
    Map,
    MapAtK,
    Ndcg,
    PrecisionAtK,
    RecallAtK,
    ExplainedVariance,
    Mae,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::Map,
        MetricName::MapAtK,
        MetricName::Ndcg,
        MetricName::PrecisionAtK,
        MetricName::RecallAtK,
        MetricName::ExplainedVariance,
        MetricName::Mae,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MetricName::Map => "MAP",
            MetricName::MapAtK => "MAP@K",
            MetricName::Ndcg => "NDCG",
            MetricName::PrecisionAtK => "Precision@K",
            MetricName::RecallAtK => "Recall@K",
            MetricName::ExplainedVariance => "Explained Var",
            MetricName::Mae => "MAE",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Map => "map",
            MetricName::MapAtK => "map_at_k",
            MetricName::Ndcg => "ndcg",
            MetricName::PrecisionAtK => "precision_at_k",
            MetricName::RecallAtK => "recall_at_k",
            MetricName::ExplainedVariance => "explained_variance",
            MetricName::Mae => "mae",
        }
    }

    /// Only MAE improves downwards.
    pub fn higher_is_better(self) -> bool {
        self != MetricName::Mae
    }
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '@'], "_");
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == norm || m.label().to_ascii_lowercase().replace(['-', '@', ' '], "_") == norm)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl MetricReport {
    pub fn get(&self, metric: MetricName) -> f64 {
        match metric {
            MetricName::Map => self.map,
            MetricName::MapAtK => self.map_at_k,
            MetricName::Ndcg => self.ndcg,
            MetricName::PrecisionAtK => self.precision_at_k,
            MetricName::RecallAtK => self.recall_at_k,
            MetricName::ExplainedVariance => self.explained_variance,
            MetricName::Mae => self.mae,
        }
    }

    /// Two-column text table, one metric per row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<13} | {:>9}", "Metric", "Value");
        let _ = writeln!(out, "{}", "-".repeat(25));
        for m in MetricName::ALL {
            let _ = writeln!(out, "{:<13} | {:>9.6}", m.label(), self.get(m));
        }
        let _ = writeln!(out, "(K = {})", self.k);
        out
    }
}

/// Which items a user's ranking is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSet {
    /// Every catalog item the user has no train interaction with.
    #[default]
    AllUnseen,
    /// Only the user's own held-out test items.
    TestItems,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    /// When set, only test ratings `>= threshold` count as relevant.
    #[serde(default)]
    pub relevance_threshold: Option<f64>,
    #[serde(default)]
    pub candidates: CandidateSet,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 10,
            relevance_threshold: None,
            candidates: CandidateSet::AllUnseen,
        }
    }
}

/// A report plus the bookkeeping behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricReport,
    pub ranked_users: usize,
    pub skipped_users: usize,
    pub scored_pairs: usize,
    pub fallback_predictions: usize,
}

pub fn evaluate(model: &dyn Recommender, split: &SplitDataset, cfg: &EvalConfig) -> Result<MetricReport> {
    evaluate_detailed(model, split, cfg).map(|e| e.report)
}

/// Ranks candidates for every test user, then aggregates the seven metrics.
///
/// Ranking metrics average over users with a non-empty relevance set; MAE and
/// explained variance use every test interaction.
pub fn evaluate_detailed(model: &dyn Recommender, split: &SplitDataset, cfg: &EvalConfig) -> Result<Evaluation> {
    if !model.is_trained() {
        return Err(Error::NotTrained);
    }
    if cfg.k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if split.test.is_empty() {
        return Err(Error::Empty);
    }
    let catalog = split.catalog_items();
    let mut sums = [0.0f64; 5];
    let mut ranked_users = 0usize;
    let mut skipped_users = 0usize;
    let mut candidates = Vec::with_capacity(catalog.len());
    for user in split.test.users() {
        let truth = RelevanceSet::graded(
            user,
            split
                .test
                .user_interactions(user)
                .filter(|it| cfg.relevance_threshold.is_none_or(|t| it.rating >= t))
                .map(|it| (it.item_id, it.rating)),
        );
        if truth.is_empty() {
            skipped_users += 1;
            continue;
        }
        candidates.clear();
        match cfg.candidates {
            CandidateSet::AllUnseen => {
                let seen: HashSet<u64> = split.train.user_interactions(user).map(|it| it.item_id).collect();
                candidates.extend(catalog.iter().copied().filter(|i| !seen.contains(i)));
            }
            CandidateSet::TestItems => {
                candidates.extend(split.test.user_interactions(user).map(|it| it.item_id));
            }
        }
        let scores = model.score_items(user, &candidates);
        let ranked = RankedList::from_scores(user, candidates.iter().copied().zip(scores).collect());
        // relevance is non-empty, so every Option is Some
        let per_user = [
            average_precision(&ranked, &truth, None),
            average_precision(&ranked, &truth, Some(cfg.k)),
            ndcg(&ranked, &truth, cfg.k),
            Some(precision_at_k(&ranked, &truth, cfg.k)),
            recall_at_k(&ranked, &truth, cfg.k),
        ];
        for (acc, v) in sums.iter_mut().zip(per_user) {
            *acc += v.unwrap_or(0.0);
        }
        ranked_users += 1;
    }
    if ranked_users == 0 {
        return Err(Error::NoEvaluableUsers);
    }
    let mut predicted = Vec::with_capacity(split.test.len());
    let mut actual = Vec::with_capacity(split.test.len());
    let mut fallback_predictions = 0;
    for it in split.test.interactions() {
        let p = model.predict(it.user_id, it.item_id);
        fallback_predictions += usize::from(p.fallback);
        predicted.push(p.value);
        actual.push(it.rating);
    }
    let n = ranked_users as f64;
    let explained = if actual.len() >= 2 {
        explained_variance(&predicted, &actual).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(Evaluation {
        report: MetricReport {
            map: sums[0] / n,
            map_at_k: sums[1] / n,
            ndcg: sums[2] / n,
            precision_at_k: sums[3] / n,
            recall_at_k: sums[4] / n,
            explained_variance: explained,
            mae: mae(&predicted, &actual)?,
            k: cfg.k,
        },
        ranked_users,
        skipped_users,
        scored_pairs: predicted.len(),
        fallback_predictions,
    })
}
