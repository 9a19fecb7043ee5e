use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use recinfluence::diagnostics::{
    ablate_against, estimate_cost, influence_sweep, measure_run_time, plot_rows, ratings_histogram, top_influencers,
    write_histogram_csv, write_plot_csv, Direction, EntitySubset, InfluenceReport, RecordStatus,
};
use recinfluence::ingest::{DatasetStats, EntityKind};
use recinfluence::metrics::evaluate_detailed;
use recinfluence::model::TrainedModel;
use serde_json::json;

use crate::config::{DatasetFormat, ExperimentConfig};
use crate::{svg, InfluenceArgs, InputError};

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Appends one JSON line with wall-clock facts; report files never carry
/// timings so they stay byte-identical across runs.
fn log_run(cfg: &ExperimentConfig, command: &str, started: Instant, extra: serde_json::Value) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)?;
    let line = json!({
        "command": command,
        "config_hash": cfg.hash()?,
        "wall_secs": started.elapsed().as_secs_f64(),
        "extra": extra,
    });
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(cfg.output_dir.join("run_log.jsonl"))?;
    writeln!(f, "{line}")?;
    Ok(())
}

fn kind_name(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::User => "users",
        EntityKind::Item => "items",
    }
}

pub fn stats(cfg: &ExperimentConfig, title: Option<String>) -> Result<()> {
    let started = Instant::now();
    let data = cfg.dataset.load()?;
    let stats = DatasetStats::compute(&data).map_err(|e| InputError::new(e.to_string()))?;
    let title = title.unwrap_or_else(|| {
        match cfg.dataset.format {
            DatasetFormat::Movielens => "MovieLens",
            DatasetFormat::Amazon => "Amazon",
        }
        .to_string()
    });
    let table = stats.to_table(&title);
    let body = json!({ "dataset_fingerprint": data.fingerprint(), "stats": stats });
    write_file(&cfg.output_dir, "stats.json", serde_json::to_string_pretty(&body)? + "\n")?;
    write_file(&cfg.output_dir, "stats.txt", &table)?;
    print!("{table}");
    log_run(cfg, "stats", started, json!({}))
}

pub fn train_eval(cfg: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let data = cfg.dataset.load()?;
    let experiment = cfg.experiment();
    let split = experiment.split(&data, experiment.master_seed)?;
    let model = experiment.model.fit_trained(
        &split.train,
        &split.catalog_users(),
        &split.catalog_items(),
        experiment.master_seed,
    )?;
    let evaluation = evaluate_detailed(model.as_recommender(), &split, &experiment.eval)?;
    let kind = experiment.model.kind();
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    match &model {
        TrainedModel::Ncf(m) => {
            m.save_checkpoint(dir.join("model_ncf.json"))?;
            let mut csv = Vec::new();
            m.write_loss_csv(&mut csv)?;
            write_file(dir, "loss_ncf.csv", csv)?;
        }
        TrainedModel::Svd(m) => {
            if let Some(requested) = m.clamped_from {
                eprintln!("warning: rank {requested} exceeds achievable rank; using {}", m.k);
            }
            write_file(dir, "model_svd.json", serde_json::to_string(m)?)?;
        }
    }
    let body = json!({
        "config_hash": cfg.hash()?,
        "model_kind": kind,
        "dataset_fingerprint": data.fingerprint(),
        "train_interactions": split.train.len(),
        "test_interactions": split.test.len(),
        "evaluation": evaluation,
    });
    write_file(dir, &format!("metrics_{kind}.json"), serde_json::to_string_pretty(&body)? + "\n")?;
    let table = evaluation.report.to_table();
    write_file(dir, &format!("metrics_{kind}.txt"), &table)?;
    print!("{table}");
    log_run(cfg, "train-eval", started, json!({ "model": kind }))
}

pub fn influence(cfg: &ExperimentConfig, kind: EntityKind, args: InfluenceArgs) -> Result<()> {
    let started = Instant::now();
    let data = cfg.dataset.load()?;
    let experiment = cfg.experiment();
    let mut plan = cfg.plan(kind);
    if let Some(ids) = args.entities {
        plan.subset = EntitySubset::List(ids);
    }
    plan.resolve(&data).map_err(|e| InputError::new(e.to_string()))?;
    let report = influence_sweep(&data, &experiment, &plan)?;
    write_influence_outputs(cfg, &data, &report, args.svg)?;
    print_influence_summary(&report);
    log_run(
        cfg,
        &format!("influence-{}", kind_name(kind)),
        started,
        json!({ "entities": report.records.len(), "workers": plan.workers }),
    )
}

fn write_influence_outputs(
    cfg: &ExperimentConfig,
    data: &recinfluence::ingest::Dataset,
    report: &InfluenceReport,
    with_svg: bool,
) -> Result<()> {
    let dir = &cfg.output_dir;
    let name = kind_name(report.entity_kind);
    write_file(dir, &format!("influence_{name}.json"), report.to_json()? + "\n")?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_file(dir, &format!("influence_{name}.csv"), buf)?;

    let rows = plot_rows(report);
    let mut buf = Vec::new();
    write_plot_csv(&rows, &mut buf)?;
    write_file(dir, &format!("plot_{name}.csv"), buf)?;

    let hist = ratings_histogram(data, report.entity_kind);
    let mut buf = Vec::new();
    write_histogram_csv(&hist, &mut buf)?;
    write_file(dir, &format!("hist_{name}.csv"), buf)?;

    let mut buf = Vec::new();
    report.write_timings_csv(&mut buf)?;
    write_file(dir, &format!("timings_{name}.csv"), buf)?;

    if with_svg {
        let values: Vec<f64> = rows.iter().map(|r| r.influence.unwrap_or(f64::NAN)).collect();
        let title = format!("Influence of {name} on {}", report.metric);
        write_file(dir, &format!("plot_{name}.svg"), svg::bar_chart(&title, name, "influence", &values))?;
        let counts: Vec<usize> = hist.iter().map(|h| h.1).collect();
        let bins = svg::histogram(&counts, 30);
        let title = format!("Ratings per {}", report.entity_kind);
        write_file(
            dir,
            &format!("hist_{name}.svg"),
            svg::bar_chart(&title, "number of ratings (30 bins)", name, &bins),
        )?;
    }
    Ok(())
}

fn print_influence_summary(report: &InfluenceReport) {
    println!(
        "baseline {} = {:.6}; {} scored, {} skipped, {} failed",
        report.metric,
        report.baseline_report.get(report.metric),
        report.count(RecordStatus::Ok),
        report.count(RecordStatus::Skipped),
        report.count(RecordStatus::Failed)
    );
    let ranked = report.ranked();
    let show = ranked.len().min(10);
    println!("most influential:");
    for r in ranked.iter().take(show) {
        println!("  {:>8}  {:+.6}", r.entity_id, r.influence.unwrap_or(f64::NAN));
    }
    println!("least influential:");
    for r in ranked.iter().rev().take(show) {
        println!("  {:>8}  {:+.6}", r.entity_id, r.influence.unwrap_or(f64::NAN));
    }
}

pub fn ablate(
    cfg: &ExperimentConfig,
    kind: EntityKind,
    direction: Direction,
    n: usize,
    report_path: Option<PathBuf>,
) -> Result<()> {
    let started = Instant::now();
    let path = report_path.unwrap_or_else(|| cfg.output_dir.join(format!("influence_{}.json", kind_name(kind))));
    let text = fs::read_to_string(&path)
        .map_err(|e| InputError::new(format!("cannot read influence report {}: {e}", path.display())))?;
    let report = InfluenceReport::from_json(&text)
        .map_err(|e| InputError::new(format!("invalid influence report {}: {e}", path.display())))?;
    if report.entity_kind != kind {
        return Err(InputError::new(format!(
            "{} holds a {} sweep, not {}",
            path.display(),
            report.entity_kind,
            kind
        ))
        .into());
    }
    let data = cfg.dataset.load()?;
    if data.fingerprint() != report.dataset_fingerprint {
        return Err(InputError::new("dataset does not match the one the influence report was computed on").into());
    }
    let entities = if n == 0 {
        Vec::new()
    } else {
        top_influencers(&report, n, direction).map_err(|e| InputError::new(e.to_string()))?
    };
    let result = ablate_against(
        &data,
        &report.experiment,
        kind,
        &entities,
        Some(direction),
        report.baseline_report,
    )?;
    let stem = format!("ablation_{}_{direction}_{n}", kind_name(kind));
    write_file(&cfg.output_dir, &format!("{stem}.json"), result.to_json()? + "\n")?;
    let table = result.to_table();
    write_file(&cfg.output_dir, &format!("{stem}.txt"), &table)?;
    println!("removed {} {}: {:?}", entities.len(), kind_name(kind), entities);
    print!("{table}");
    println!("{} of 7 measures improved", result.improved_count());
    log_run(cfg, "ablate", started, json!({ "n": n, "direction": direction }))
}

pub fn cost_estimate(cfg: &ExperimentConfig, kind: EntityKind, n: usize, verify: bool) -> Result<()> {
    let started = Instant::now();
    let data = cfg.dataset.load()?;
    let experiment = cfg.experiment();
    let mut plan = cfg.plan(kind);
    plan.subset = EntitySubset::Sample {
        size: n,
        seed: cfg.sweep.sample_seed,
    };
    let entities = plan.resolve(&data)?;
    let t_train = measure_run_time(&data, &experiment)?;
    let estimate = estimate_cost(entities.len(), plan.workers, t_train)?;
    println!(
        "t_train = {:.3}s; projected sweep of {} {} on {} worker(s): {:.1}s",
        estimate.t_train_secs,
        estimate.n_entities,
        kind_name(kind),
        estimate.workers,
        estimate.projected_secs
    );
    let mut body = json!({ "estimate": estimate });
    if verify {
        let report = influence_sweep(&data, &experiment, &plan)?;
        let measured = report.timings.total_secs - report.timings.baseline_secs;
        let ratio = estimate.projected_secs / measured;
        println!("measured sweep: {measured:.1}s (projection/measured = {ratio:.2})");
        body["measured_secs"] = json!(measured);
        body["ratio"] = json!(ratio);
    }
    write_file(&cfg.output_dir, "cost_estimate.json", serde_json::to_string_pretty(&body)? + "\n")?;
    log_run(cfg, "cost-estimate", started, body)
}
