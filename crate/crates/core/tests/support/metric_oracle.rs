//! Brute-force reimplementation of the seven evaluation measures.
//!
//! Ranks are computed by counting, not sorting: an item's rank is one plus
//! the number of candidates with a strictly higher score, or an equal score
//! and a smaller id.

use std::collections::HashMap;

use rand::Rng;
use recinfluence::ingest::{Dataset, DatasetKind, Interaction, SplitDataset};
use recinfluence::metrics::{CandidateSet, EvalConfig, MetricName, MetricReport};
use recinfluence::model::{ModelKind, Prediction, Recommender};
use recinfluence::seeding::{rng, Stream};

/// Scores looked up from a table; missing pairs score 0.
pub struct TableModel {
    pub scores: HashMap<(u64, u64), f64>,
}

impl Recommender for TableModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Svd
    }

    fn is_trained(&self) -> bool {
        true
    }

    fn predict(&self, user_id: u64, item_id: u64) -> Prediction {
        Prediction {
            value: self.scores.get(&(user_id, item_id)).copied().unwrap_or(0.0),
            fallback: false,
        }
    }
}

pub struct Instance {
    pub split: SplitDataset,
    pub model: TableModel,
    pub cfg: EvalConfig,
}

/// A random instance with at most 10 users and 10 items and at least one
/// user with a relevant held-out item. Scores come from a small set of
/// values so ties are common.
pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed, Stream::Subsample, &[0x6d65]);
    loop {
        let n_users = r.gen_range(1..=10u64);
        let n_items = r.gen_range(2..=10u64);
        let density = r.gen_range(0.2..0.9);
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut scores = HashMap::new();
        for u in 1..=n_users {
            for i in 1..=n_items {
                scores.insert((u * 7, i * 3), f64::from(r.gen_range(0..6u8)) / 2.0 - 1.0);
                if r.gen_bool(density) {
                    let it = Interaction::new(u * 7, i * 3, f64::from(r.gen_range(1..=5u8)));
                    if r.gen_bool(0.7) {
                        train.push(it);
                    } else {
                        test.push(it);
                    }
                }
            }
        }
        let cfg = EvalConfig {
            k: r.gen_range(1..=10),
            relevance_threshold: if r.gen_bool(0.5) { Some(f64::from(r.gen_range(2..=4u8))) } else { None },
            candidates: if r.gen_bool(0.7) {
                CandidateSet::AllUnseen
            } else {
                CandidateSet::TestItems
            },
        };
        let threshold = cfg.relevance_threshold.unwrap_or(f64::NEG_INFINITY);
        if !test.iter().any(|it: &Interaction| it.rating >= threshold) {
            continue;
        }
        let scale = (1.0, 5.0);
        let split = SplitDataset {
            train: Dataset::new(train, DatasetKind::Explicit, scale).unwrap(),
            test: Dataset::new(test, DatasetKind::Explicit, scale).unwrap(),
            split_seed: seed,
            train_fraction: 0.7,
        };
        return Instance {
            split,
            model: TableModel { scores },
            cfg,
        };
    }
}

/// The seven measures, in [`MetricName::ALL`] order.
pub fn brute_force(inst: &Instance) -> [f64; 7] {
    let train = inst.split.train.interactions();
    let test = inst.split.test.interactions();
    let k = inst.cfg.k;
    let threshold = inst.cfg.relevance_threshold.unwrap_or(f64::NEG_INFINITY);
    let score = |u: u64, i: u64| inst.model.scores.get(&(u, i)).copied().unwrap_or(0.0);

    let mut catalog: Vec<u64> = train.iter().chain(test).map(|it| it.item_id).collect();
    catalog.sort();
    catalog.dedup();
    let mut test_users: Vec<u64> = test.iter().map(|it| it.user_id).collect();
    test_users.sort();
    test_users.dedup();

    let mut sums = [0.0; 5];
    let mut n_ranked = 0usize;
    for &u in &test_users {
        let gains: HashMap<u64, f64> = test
            .iter()
            .filter(|it| it.user_id == u && it.rating >= threshold)
            .map(|it| (it.item_id, it.rating))
            .collect();
        if gains.is_empty() {
            continue;
        }
        let candidates: Vec<u64> = match inst.cfg.candidates {
            CandidateSet::AllUnseen => catalog
                .iter()
                .copied()
                .filter(|&i| !train.iter().any(|it| it.user_id == u && it.item_id == i))
                .collect(),
            CandidateSet::TestItems => test.iter().filter(|it| it.user_id == u).map(|it| it.item_id).collect(),
        };
        let rank_of = |i: u64| {
            1 + candidates
                .iter()
                .filter(|&&j| score(u, j) > score(u, i) || (score(u, j) == score(u, i) && j < i))
                .count()
        };
        let ranks: HashMap<u64, usize> = candidates.iter().map(|&i| (i, rank_of(i))).collect();
        let relevant_rank = |i: &u64| ranks.get(i).copied();
        let n_rel = gains.len() as f64;

        let ap = |cut: usize| {
            gains
                .keys()
                .filter_map(relevant_rank)
                .filter(|&r| r <= cut)
                .map(|r| {
                    let above = gains.keys().filter_map(relevant_rank).filter(|&q| q <= r).count();
                    above as f64 / r as f64
                })
                .sum::<f64>()
                / n_rel
        };
        let hits = gains.keys().filter_map(relevant_rank).filter(|&r| r <= k).count() as f64;
        let dcg: f64 = gains
            .iter()
            .filter_map(|(i, g)| relevant_rank(i).filter(|&r| r <= k).map(|r| g / (r as f64 + 1.0).log2()))
            .sum();
        let mut ideal: Vec<f64> = gains.values().copied().collect();
        ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let idcg: f64 = ideal
            .iter()
            .take(k)
            .enumerate()
            .map(|(p, g)| g / (p as f64 + 2.0).log2())
            .sum();

        sums[0] += ap(usize::MAX);
        sums[1] += ap(k);
        sums[2] += dcg / idcg;
        sums[3] += hits / k as f64;
        sums[4] += hits / n_rel;
        n_ranked += 1;
    }

    let n = test.len() as f64;
    let residuals: Vec<f64> = test.iter().map(|it| it.rating - score(it.user_id, it.item_id)).collect();
    let mae = residuals.iter().map(|e| e.abs()).sum::<f64>() / n;
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    let actual: Vec<f64> = test.iter().map(|it| it.rating).collect();
    let ev = if test.len() < 2 || var(&actual) == 0.0 {
        f64::NAN
    } else {
        1.0 - var(&residuals) / var(&actual)
    };
    let m = n_ranked as f64;
    [sums[0] / m, sums[1] / m, sums[2] / m, sums[3] / m, sums[4] / m, ev, mae]
}

/// Largest absolute disagreement between `report` and the oracle. Both
/// sides undefined (NaN) counts as agreement; one side NaN is infinite
/// disagreement.
pub fn max_disagreement(report: &MetricReport, oracle: &[f64; 7]) -> f64 {
    MetricName::ALL
        .iter()
        .zip(oracle)
        .map(|(&m, &want)| {
            let got = report.get(m);
            match (got.is_nan(), want.is_nan()) {
                (true, true) => 0.0,
                (false, false) => (got - want).abs(),
                _ => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max)
}
