use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Experiment, SeedMode};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, EntityKind};
use crate::metrics::{MetricName, MetricReport};
use crate::model::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    /// Entity had no training interactions in the baseline split.
    Skipped,
    /// Retraining or evaluation without the entity failed.
    Failed,
}

/// Influence of one deleted entity. `influence == baseline_eval − deleted_eval`
/// whenever both are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRecord {
    pub entity_id: u64,
    pub entity_kind: EntityKind,
    pub metric: MetricName,
    #[serde(with = "crate::serde_nan")]
    pub baseline_eval: f64,
    pub deleted_eval: Option<f64>,
    pub influence: Option<f64>,
    pub retrain_seed: u64,
    pub status: RecordStatus,
    pub message: Option<String>,
}

/// Wall-clock measurements, kept out of the deterministic report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTimings {
    pub baseline_secs: f64,
    pub per_entity: Vec<(u64, f64)>,
    pub total_secs: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub entity_kind: EntityKind,
    pub metric: MetricName,
    pub model_kind: ModelKind,
    pub experiment: Experiment,
    pub seed_mode: SeedMode,
    pub dataset_fingerprint: String,
    pub baseline_report: MetricReport,
    /// Ascending entity id.
    pub records: Vec<InfluenceRecord>,
    #[serde(skip)]
    pub timings: SweepTimings,
}

impl InfluenceReport {
    /// Scored records by influence descending, ties by ascending id.
    pub fn ranked(&self) -> Vec<&InfluenceRecord> {
        let mut scored: Vec<&InfluenceRecord> = self.records.iter().filter(|r| r.influence.is_some()).collect();
        scored.sort_by(|a, b| {
            let (x, y) = (a.influence.unwrap_or(f64::NAN), b.influence.unwrap_or(f64::NAN));
            y.total_cmp(&x).then(a.entity_id.cmp(&b.entity_id))
        });
        scored
    }

    pub fn count(&self, status: RecordStatus) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per record, in report order.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `entity_id,wall_time_secs`, preceded by a `baseline` row.
    pub fn write_timings_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["entity_id", "wall_time_secs"])?;
        w.write_record(["baseline".to_string(), self.timings.baseline_secs.to_string()])?;
        for (id, t) in &self.timings.per_entity {
            w.write_record([id.to_string(), t.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses the output of [`InfluenceReport::write_csv`].
pub fn read_influence_csv(input: impl Read) -> Result<Vec<InfluenceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// One bar of an influence plot: position in id order and the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub index: usize,
    pub entity_id: u64,
    pub influence: Option<f64>,
}

pub fn plot_rows(report: &InfluenceReport) -> Vec<PlotRow> {
    report
        .records
        .iter()
        .enumerate()
        .map(|(k, r)| PlotRow {
            index: k + 1,
            entity_id: r.entity_id,
            influence: r.influence,
        })
        .collect()
}

/// Positive interactions per entity, ascending id.
pub fn ratings_histogram(data: &Dataset, kind: EntityKind) -> Vec<(u64, usize)> {
    data.filter(|it| it.is_positive()).counts(kind)
}

/// `index,entity_id,influence` rows.
pub fn write_plot_csv(rows: &[PlotRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plot_csv(input: impl Read) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// `entity_id,n_ratings` rows.
pub fn write_histogram_csv(counts: &[(u64, usize)], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity_id", "n_ratings"])?;
    for (id, n) in counts {
        w.write_record([id.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Largest influence first.
    Most,
    /// Smallest influence first.
    Least,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "most" | "most-influential" | "most_influential" => Ok(Direction::Most),
            "least" | "least-influential" | "least_influential" => Ok(Direction::Least),
            _ => Err(Error::invalid(format!("unknown direction {s:?}"))),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Most => "most",
            Direction::Least => "least",
        })
    }
}

/// `(after − before) / before × 100`, undefined when `before` is zero or
/// either side is not finite.
pub fn percent_delta(before: f64, after: f64) -> Option<f64> {
    (before != 0.0 && before.is_finite() && after.is_finite()).then(|| (after - before) / before * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub entity_kind: EntityKind,
    pub removed_entities: Vec<u64>,
    pub direction: Option<Direction>,
    pub before: MetricReport,
    pub after: MetricReport,
    pub percent_delta: BTreeMap<MetricName, Option<f64>>,
}

impl AblationReport {
    pub fn new(
        entity_kind: EntityKind,
        removed_entities: Vec<u64>,
        direction: Option<Direction>,
        before: MetricReport,
        after: MetricReport,
    ) -> Self {
        let percent_delta = MetricName::ALL
            .into_iter()
            .map(|m| (m, percent_delta(before.get(m), after.get(m))))
            .collect();
        AblationReport {
            entity_kind,
            removed_entities,
            direction,
            before,
            after,
            percent_delta,
        }
    }

    /// Whether the measure moved in its good direction; `None` if undefined.
    pub fn improved(&self, metric: MetricName) -> Option<bool> {
        let (b, a) = (self.before.get(metric), self.after.get(metric));
        if !(a.is_finite() && b.is_finite()) {
            return None;
        }
        Some(if metric.higher_is_better() { a > b } else { a < b })
    }

    pub fn improved_count(&self) -> usize {
        MetricName::ALL.into_iter().filter(|&m| self.improved(m) == Some(true)).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Metric, value without the entities, original value, percent change.
    pub fn to_table(&self) -> String {
        let fmt = |x: f64| if x.is_finite() { format!("{x:.6}") } else { "n/a".into() };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<13} | {:>12} | {:>12} | {:>12}",
            "Metric", "Without", "Original", "% Difference"
        );
        let _ = writeln!(out, "{}", "-".repeat(58));
        for m in MetricName::ALL {
            let pct = match self.percent_delta.get(&m).copied().flatten() {
                Some(p) => format!("{p:+.2}%"),
                None => "n/a".into(),
            };
            let _ = writeln!(
                out,
                "{:<13} | {:>12} | {:>12} | {:>12}",
                m.label(),
                fmt(self.after.get(m)),
                fmt(self.before.get(m)),
                pct
            );
        }
        out
    }
}
