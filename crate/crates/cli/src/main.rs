mod commands;
mod config;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use recinfluence::diagnostics::{Direction, SeedMode};
use recinfluence::ingest::EntityKind;
use recinfluence::metrics::MetricName;
use recinfluence::model::{ModelKind, ModelSpec};

use crate::config::{DatasetFormat, ExperimentConfig};

/// Bad input (missing file, malformed config, invalid flag value): exit 2.
#[derive(Debug)]
pub struct InputError(String);

impl InputError {
    pub fn new(msg: impl Into<String>) -> Self {
        InputError(msg.into())
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser)]
#[command(name = "recinfluence", version, about = "Deletion diagnostics for NCF and SVD recommenders")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GlobalArgs {
    /// TOML experiment config; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<DatasetFormat>,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Influence measure (map, map_at_k, ndcg, precision_at_k, recall_at_k,
    /// explained_variance, mae).
    #[arg(long, global = true, value_parser = parse_metric)]
    metric: Option<MetricName>,
    /// Ranking cutoff K.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Sweep a uniform sample of this many entities.
    #[arg(long, global = true)]
    sample_size: Option<usize>,
    #[arg(long, global = true, value_enum)]
    seed_mode: Option<SeedModeArg>,
    /// NCF training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset statistics table.
    Stats {
        /// Column title of the table.
        #[arg(long)]
        title: Option<String>,
    },
    /// Train the configured model once and evaluate it.
    TrainEval,
    /// Leave-one-user-out influence sweep.
    InfluenceUsers(InfluenceArgs),
    /// Leave-one-item-out influence sweep.
    InfluenceItems(InfluenceArgs),
    /// Remove the top-n entities of an influence report jointly and retrain.
    Ablate {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Influence report JSON (default: <output-dir>/influence_<kind>.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Project sweep wall time from one measured retrain.
    CostEstimate {
        #[arg(long, value_enum, default_value_t = KindArg::Users)]
        kind: KindArg,
        /// Number of entities to project for.
        #[arg(long, default_value_t = 20)]
        entities: usize,
        /// Also run that sweep and compare.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Args, Clone, Default)]
pub struct InfluenceArgs {
    /// Sweep only these ids.
    #[arg(long, value_delimiter = ',')]
    entities: Option<Vec<u64>>,
    /// Also render SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ncf,
    Svd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Users,
    Items,
}

impl From<KindArg> for EntityKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Users => EntityKind::User,
            KindArg::Items => EntityKind::Item,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Most,
    Least,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedModeArg {
    PerEntity,
    Shared,
}

fn parse_metric(s: &str) -> std::result::Result<MetricName, String> {
    s.parse().map_err(|e: recinfluence::Error| e.to_string())
}

fn resolve_config(g: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &g.output_dir {
        cfg.output_dir = p.clone();
    }
    if let Some(p) = &g.dataset {
        cfg.dataset.path = p.clone();
    }
    if let Some(f) = g.format {
        cfg.dataset.format = f;
    }
    if let Some(m) = g.model {
        let wanted = match m {
            ModelArg::Ncf => ModelKind::Ncf,
            ModelArg::Svd => ModelKind::Svd,
        };
        if cfg.model.kind() != wanted {
            cfg.model = match wanted {
                ModelKind::Ncf => ModelSpec::Ncf(Default::default()),
                ModelKind::Svd => ModelSpec::Svd(Default::default()),
            };
        }
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.sweep.workers = w;
    }
    if let Some(m) = g.metric {
        cfg.sweep.metric = m;
    }
    if let Some(k) = g.k {
        cfg.eval.k = k;
    }
    if let Some(n) = g.sample_size {
        cfg.sweep.sample_size = Some(n);
    }
    if let Some(mode) = g.seed_mode {
        cfg.sweep.seed_mode = match mode {
            SeedModeArg::PerEntity => SeedMode::PerEntity,
            SeedModeArg::Shared => SeedMode::Shared,
        };
    }
    if let Some(e) = g.epochs {
        match &mut cfg.model {
            ModelSpec::Ncf(c) => c.epochs = e,
            ModelSpec::Svd(_) => return Err(InputError::new("--epochs applies to the NCF model only").into()),
        }
    }
    if cfg.sweep.workers == 0 {
        return Err(InputError::new("--workers must be at least 1").into());
    }
    if cfg.eval.k == 0 {
        return Err(InputError::new("--k must be at least 1").into());
    }
    if let ModelSpec::Ncf(c) = &cfg.model {
        c.validate().map_err(|e| InputError::new(e.to_string()))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    match cli.command {
        Command::Stats { title } => commands::stats(&cfg, title),
        Command::TrainEval => commands::train_eval(&cfg),
        Command::InfluenceUsers(args) => commands::influence(&cfg, EntityKind::User, args),
        Command::InfluenceItems(args) => commands::influence(&cfg, EntityKind::Item, args),
        Command::Ablate {
            kind,
            direction,
            n,
            report,
        } => {
            let direction = match direction {
                DirectionArg::Most => Direction::Most,
                DirectionArg::Least => Direction::Least,
            };
            commands::ablate(&cfg, kind.into(), direction, n, report)
        }
        Command::CostEstimate { kind, entities, verify } => commands::cost_estimate(&cfg, kind.into(), entities, verify),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<InputError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
