//! Leave-one-out sweeps against an independently written
//! delete → split → train → evaluate loop.

use rand::Rng;
use recinfluence::diagnostics::{
    entity_seed, influence_sweep, Experiment, InfluenceRecord, InfluenceReport, RecordStatus, SeedMode, SweepPlan,
};
use recinfluence::ingest::{split, Dataset, DatasetKind, EntityKind, Interaction};
use recinfluence::metrics::evaluate;
use recinfluence::model::ModelSpec;
use recinfluence::ncf::NcfConfig;
use recinfluence::seeding::{rng, Stream};
use recinfluence::svd_model::SvdConfig;

/// 6 users × 8 items, about 60% of pairs rated 1-5. User 6 has a single
/// rating so that some split leaves it without training data.
pub fn toy_dataset() -> Dataset {
    let mut r = rng(6, Stream::Subsample, &[8]);
    let mut rows = Vec::new();
    for u in 1..=5u64 {
        for i in 1..=8u64 {
            if r.gen_bool(0.6) {
                rows.push(Interaction::new(u, i, f64::from(r.gen_range(1..=5u8))));
            }
        }
    }
    rows.push(Interaction::new(6, 3, 4.0));
    Dataset::new(rows, DatasetKind::Explicit, (1.0, 5.0)).unwrap()
}

pub fn toy_experiments() -> Vec<Experiment> {
    let ncf = NcfConfig {
        epochs: 5,
        batch_size: 16,
        learning_rate: 0.05,
        ..NcfConfig::default()
    };
    let svd = SvdConfig {
        rank: 3,
        ..SvdConfig::default()
    };
    vec![
        Experiment {
            model: ModelSpec::Ncf(ncf),
            master_seed: 11,
            split_seed: 3,
            ..Experiment::default()
        },
        Experiment {
            model: ModelSpec::Svd(svd),
            master_seed: 11,
            split_seed: 3,
            ..Experiment::default()
        },
    ]
}

/// The record the sweep should produce for `id`, computed from scratch.
pub fn oracle_record(
    data: &Dataset,
    exp: &Experiment,
    kind: EntityKind,
    id: u64,
    mode: SeedMode,
    baseline: f64,
    metric: recinfluence::metrics::MetricName,
) -> InfluenceRecord {
    let seed = match mode {
        SeedMode::PerEntity => entity_seed(exp.master_seed, id),
        SeedMode::Shared => exp.master_seed,
    };
    let base_split = split(data, exp.train_fraction, exp.split_seed, exp.split_strategy).unwrap();
    let in_train = base_split.train.interactions().iter().any(|it| {
        let owner = match kind {
            EntityKind::User => it.user_id,
            EntityKind::Item => it.item_id,
        };
        owner == id && it.rating > 0.0
    });
    let mut rec = InfluenceRecord {
        entity_id: id,
        entity_kind: kind,
        metric,
        baseline_eval: baseline,
        deleted_eval: None,
        influence: None,
        retrain_seed: seed,
        status: RecordStatus::Skipped,
        message: None,
    };
    if !in_train {
        return rec;
    }
    let kept: Vec<Interaction> = data
        .interactions()
        .iter()
        .filter(|it| match kind {
            EntityKind::User => it.user_id != id,
            EntityKind::Item => it.item_id != id,
        })
        .copied()
        .collect();
    let reduced = Dataset::new(kept, data.kind(), data.rating_scale()).unwrap();
    let s = split(&reduced, exp.train_fraction, exp.split_seed, exp.split_strategy).unwrap();
    let model = exp.model.fit(&s.train, &s.catalog_users(), &s.catalog_items(), seed).unwrap();
    let deleted = evaluate(model.as_ref(), &s, &exp.eval).unwrap().get(metric);
    rec.status = RecordStatus::Ok;
    rec.deleted_eval = Some(deleted);
    rec.influence = Some(baseline - deleted);
    rec
}

/// Baseline metric from scratch.
pub fn oracle_baseline(data: &Dataset, exp: &Experiment, metric: recinfluence::metrics::MetricName) -> f64 {
    let s = split(data, exp.train_fraction, exp.split_seed, exp.split_strategy).unwrap();
    let model = exp
        .model
        .fit(&s.train, &s.catalog_users(), &s.catalog_items(), exp.master_seed)
        .unwrap();
    evaluate(model.as_ref(), &s, &exp.eval).unwrap().get(metric)
}

/// Mismatches between a sweep and the oracle, one line each.
pub fn compare_with_oracle(data: &Dataset, exp: &Experiment, plan: &SweepPlan, report: &InfluenceReport) -> Vec<String> {
    let mut problems = Vec::new();
    let baseline = oracle_baseline(data, exp, plan.metric);
    if report.baseline_report.get(plan.metric).to_bits() != baseline.to_bits() {
        problems.push(format!("baseline {} != {}", report.baseline_report.get(plan.metric), baseline));
    }
    let ids = data.entities(plan.entity_kind);
    if report.records.len() != ids.len() {
        problems.push(format!("{} records for {} entities", report.records.len(), ids.len()));
    }
    for (rec, &id) in report.records.iter().zip(&ids) {
        let want = oracle_record(data, exp, plan.entity_kind, id, plan.seed_mode, baseline, plan.metric);
        let same = rec.entity_id == want.entity_id
            && rec.status == want.status
            && rec.retrain_seed == want.retrain_seed
            && rec.baseline_eval.to_bits() == want.baseline_eval.to_bits()
            && rec.deleted_eval.map(f64::to_bits) == want.deleted_eval.map(f64::to_bits)
            && rec.influence.map(f64::to_bits) == want.influence.map(f64::to_bits);
        if !same {
            problems.push(format!("entity {id}: sweep {rec:?}, oracle {want:?}"));
        }
    }
    problems
}

/// Serialized JSON and CSV bytes of a sweep.
pub fn report_bytes(report: &InfluenceReport) -> (String, Vec<u8>) {
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    (report.to_json().unwrap(), csv)
}

/// Runs every (model, kind, seed mode) combination on the toy dataset.
/// Returns oracle mismatches and serial-versus-parallel byte mismatches.
pub fn run() -> (Vec<String>, Vec<String>) {
    let data = toy_dataset();
    let mut oracle_problems = Vec::new();
    let mut schedule_problems = Vec::new();
    for exp in toy_experiments() {
        for kind in [EntityKind::User, EntityKind::Item] {
            for mode in [SeedMode::PerEntity, SeedMode::Shared] {
                let mut plan = SweepPlan::new(kind);
                plan.seed_mode = mode;
                let serial = influence_sweep(&data, &exp, &plan).unwrap();
                oracle_problems.extend(
                    compare_with_oracle(&data, &exp, &plan, &serial)
                        .into_iter()
                        .map(|p| format!("{} {kind} {mode:?}: {p}", exp.model.kind())),
                );
                plan.workers = 4;
                let parallel = influence_sweep(&data, &exp, &plan).unwrap();
                if report_bytes(&serial) != report_bytes(&parallel) {
                    schedule_problems.push(format!("{} {kind} {mode:?}: 1 vs 4 workers differ", exp.model.kind()));
                }
            }
        }
    }
    (oracle_problems, schedule_problems)
}
