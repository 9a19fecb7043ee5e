//! Leave-one-entity-out retraining.
//!
//! The influence of an entity is `eval − eval⁽⁻ⁱ⁾`: the chosen measure on the
//! baseline pipeline minus the same measure after deleting every interaction
//! of the entity, re-splitting with the same split seed and retraining from
//! scratch. Sweeps run entities on a bounded worker pool; each task derives
//! its randomness from (master seed, entity id) alone, so the output does not
//! depend on the number of workers or on scheduling.

mod report;

use std::time::{Duration, Instant};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{
    percent_delta, plot_rows, ratings_histogram, read_influence_csv, read_plot_csv, write_histogram_csv,
    write_plot_csv, AblationReport, Direction, InfluenceRecord, InfluenceReport, PlotRow, RecordStatus, SweepTimings,
};

use crate::error::{Error, Result};
use crate::ingest::{negative_sample, split, Dataset, DatasetKind, EntityKind, SplitDataset, SplitStrategy};
use crate::metrics::{evaluate, EvalConfig, MetricName, MetricReport};
use crate::model::ModelSpec;
use crate::seeding::{self, Stream};

/// Everything needed to go from a dataset to a [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Experiment {
    pub model: ModelSpec,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub split_strategy: SplitStrategy,
    /// Seed of the baseline run; deletion seeds are derived from it.
    pub master_seed: u64,
    pub eval: EvalConfig,
    /// Negatives per positive drawn for implicit data before splitting.
    pub negative_ratio: usize,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            model: ModelSpec::default(),
            train_fraction: 0.75,
            split_seed: 0,
            split_strategy: SplitStrategy::Global,
            master_seed: 0,
            eval: EvalConfig::default(),
            negative_ratio: 4,
        }
    }
}

/// Output of one pipeline run.
pub struct RunOutcome {
    pub report: MetricReport,
    pub split: SplitDataset,
}

impl Experiment {
    /// Split, train with `seed`, evaluate.
    ///
    /// Implicit data without negatives first gets `negative_ratio` sampled
    /// negatives per positive (seeded by `seed`), so the held-out side holds
    /// both classes.
    pub fn run(&self, data: &Dataset, seed: u64) -> Result<RunOutcome> {
        let split = self.split(data, seed)?;
        let model = self
            .model
            .fit(&split.train, &split.catalog_users(), &split.catalog_items(), seed)?;
        let report = evaluate(model.as_ref(), &split, &self.eval)?;
        Ok(RunOutcome { report, split })
    }

    /// The train/test partition a run with `seed` uses.
    pub fn split(&self, data: &Dataset, seed: u64) -> Result<SplitDataset> {
        if data.kind() == DatasetKind::Implicit && !data.has_negatives() {
            let neg_seed = seeding::derive(seed, Stream::Negatives, &[]);
            let sampled = negative_sample(data, self.negative_ratio, neg_seed)?;
            split(&sampled, self.train_fraction, self.split_seed, self.split_strategy)
        } else {
            split(data, self.train_fraction, self.split_seed, self.split_strategy)
        }
    }
}

/// Which entities a sweep visits.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntitySubset {
    #[default]
    All,
    List(Vec<u64>),
    /// Uniform sample without replacement.
    Sample { size: usize, seed: u64 },
}

/// Seed used for each deletion retrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// `hash(master_seed, entity_id)`.
    #[default]
    PerEntity,
    /// Every run uses the master seed, isolating pure data effects.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub entity_kind: EntityKind,
    #[serde(default)]
    pub subset: EntitySubset,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub seed_mode: SeedMode,
    #[serde(default)]
    pub metric: MetricName,
}

fn one() -> usize {
    1
}

impl SweepPlan {
    pub fn new(entity_kind: EntityKind) -> Self {
        SweepPlan {
            entity_kind,
            subset: EntitySubset::All,
            workers: 1,
            seed_mode: SeedMode::PerEntity,
            metric: MetricName::Map,
        }
    }

    /// Entities the plan visits, ascending.
    pub fn resolve(&self, data: &Dataset) -> Result<Vec<u64>> {
        let all = data.entities(self.entity_kind);
        let mut out = match &self.subset {
            EntitySubset::All => all,
            EntitySubset::List(ids) => {
                for &id in ids {
                    if !data.contains(self.entity_kind, id) {
                        return Err(Error::NotFound {
                            kind: self.entity_kind.as_str(),
                            id,
                        });
                    }
                }
                ids.clone()
            }
            EntitySubset::Sample { size, seed } => {
                let mut rng = seeding::rng(*seed, Stream::Subsample, &[]);
                let size = (*size).min(all.len());
                index::sample(&mut rng, all.len(), size).into_iter().map(|k| all[k]).collect()
            }
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Retrain seed for one entity.
    pub fn entity_seed(&self, master_seed: u64, entity_id: u64) -> u64 {
        match self.seed_mode {
            SeedMode::PerEntity => entity_seed(master_seed, entity_id),
            SeedMode::Shared => master_seed,
        }
    }
}

/// Position-independent per-entity seed.
pub fn entity_seed(master_seed: u64, entity_id: u64) -> u64 {
    seeding::derive(master_seed, Stream::Entity, &[entity_id])
}

pub fn influence_sweep_users(data: &Dataset, experiment: &Experiment, plan: &SweepPlan) -> Result<InfluenceReport> {
    if plan.entity_kind != EntityKind::User {
        return Err(Error::invalid("plan is not a user sweep"));
    }
    influence_sweep(data, experiment, plan)
}

pub fn influence_sweep_items(data: &Dataset, experiment: &Experiment, plan: &SweepPlan) -> Result<InfluenceReport> {
    if plan.entity_kind != EntityKind::Item {
        return Err(Error::invalid("plan is not an item sweep"));
    }
    influence_sweep(data, experiment, plan)
}

/// Baseline run plus one delete→split→train→evaluate run per planned entity.
///
/// Entities with no training interaction in the baseline split are recorded
/// as skipped. A failed retrain is recorded and the sweep continues.
pub fn influence_sweep(data: &Dataset, experiment: &Experiment, plan: &SweepPlan) -> Result<InfluenceReport> {
    if plan.workers == 0 {
        return Err(Error::invalid("workers must be at least 1"));
    }
    let entities = plan.resolve(data)?;
    let started = Instant::now();
    let baseline = experiment.run(data, experiment.master_seed)?;
    let baseline_secs = started.elapsed().as_secs_f64();
    let baseline_eval = baseline.report.get(plan.metric);

    let task = |&id: &u64| -> (InfluenceRecord, f64) {
        let t0 = Instant::now();
        let seed = plan.entity_seed(experiment.master_seed, id);
        let mut record = InfluenceRecord {
            entity_id: id,
            entity_kind: plan.entity_kind,
            metric: plan.metric,
            baseline_eval,
            deleted_eval: None,
            influence: None,
            retrain_seed: seed,
            status: RecordStatus::Ok,
            message: None,
        };
        if baseline.split.train.positive_count(plan.entity_kind, id) == 0 {
            record.status = RecordStatus::Skipped;
            record.message = Some("no training interactions".into());
        } else {
            match data.delete(plan.entity_kind, id).and_then(|d| experiment.run(&d, seed)) {
                Ok(run) => {
                    let deleted = run.report.get(plan.metric);
                    record.deleted_eval = Some(deleted);
                    record.influence = Some(baseline_eval - deleted);
                }
                Err(e) => {
                    record.status = RecordStatus::Failed;
                    record.message = Some(e.to_string());
                }
            }
        }
        (record, t0.elapsed().as_secs_f64())
    };

    let results: Vec<(InfluenceRecord, f64)> = if plan.workers == 1 {
        entities.iter().map(task).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
        pool.install(|| entities.par_iter().map(task).collect())
    };

    let (records, per_entity): (Vec<_>, Vec<_>) = results
        .into_iter()
        .map(|(r, t)| {
            let id = r.entity_id;
            (r, (id, t))
        })
        .unzip();
    Ok(InfluenceReport {
        entity_kind: plan.entity_kind,
        metric: plan.metric,
        model_kind: experiment.model.kind(),
        experiment: experiment.clone(),
        seed_mode: plan.seed_mode,
        dataset_fingerprint: data.fingerprint(),
        baseline_report: baseline.report,
        records,
        timings: SweepTimings {
            baseline_secs,
            per_entity,
            total_secs: started.elapsed().as_secs_f64(),
            workers: plan.workers,
        },
    })
}

/// Entities with the largest (`Most`) or smallest (`Least`) influence, ties
/// by ascending id. Records without an influence value are ignored.
pub fn top_influencers(report: &InfluenceReport, n: usize, direction: Direction) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut scored: Vec<(u64, f64)> = report
        .records
        .iter()
        .filter_map(|r| r.influence.filter(|x| !x.is_nan()).map(|x| (r.entity_id, x)))
        .collect();
    if n > scored.len() {
        return Err(Error::invalid(format!("asked for {n} entities, only {} scored", scored.len())));
    }
    scored.sort_by(|a, b| {
        let by_value = match direction {
            Direction::Most => b.1.total_cmp(&a.1),
            Direction::Least => a.1.total_cmp(&b.1),
        };
        by_value.then(a.0.cmp(&b.0))
    });
    Ok(scored.into_iter().take(n).map(|s| s.0).collect())
}

/// Removes `entities` jointly, retrains once with the master seed and
/// compares every measure against the baseline.
pub fn ablate(
    data: &Dataset,
    experiment: &Experiment,
    kind: EntityKind,
    entities: &[u64],
    direction: Option<Direction>,
) -> Result<AblationReport> {
    let before = experiment.run(data, experiment.master_seed)?.report;
    ablate_against(data, experiment, kind, entities, direction, before)
}

/// As [`ablate`], reusing an already computed baseline report.
pub fn ablate_against(
    data: &Dataset,
    experiment: &Experiment,
    kind: EntityKind,
    entities: &[u64],
    direction: Option<Direction>,
    before: MetricReport,
) -> Result<AblationReport> {
    let after = if entities.is_empty() {
        experiment.run(data, experiment.master_seed)?.report
    } else {
        let reduced = data.delete_all(kind, entities)?;
        if reduced.is_empty() {
            return Err(Error::Empty);
        }
        experiment.run(&reduced, experiment.master_seed)?.report
    };
    Ok(AblationReport::new(kind, entities.to_vec(), direction, before, after))
}

/// Projected wall time of a sweep: `n × t_train / workers`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub n_entities: usize,
    pub workers: usize,
    pub t_train_secs: f64,
    pub projected_secs: f64,
}

impl CostEstimate {
    pub fn projected(&self) -> Duration {
        Duration::from_secs_f64(self.projected_secs)
    }
}

pub fn estimate_cost(n_entities: usize, workers: usize, measured_t_train: Duration) -> Result<CostEstimate> {
    if workers == 0 {
        return Err(Error::invalid("workers must be at least 1"));
    }
    let t = measured_t_train.as_secs_f64();
    Ok(CostEstimate {
        n_entities,
        workers,
        t_train_secs: t,
        projected_secs: n_entities as f64 * t / workers as f64,
    })
}

/// Times one full pipeline run (split, train, evaluate) on `data`.
pub fn measure_run_time(data: &Dataset, experiment: &Experiment) -> Result<Duration> {
    let t0 = Instant::now();
    experiment.run(data, experiment.master_seed)?;
    Ok(t0.elapsed())
}
