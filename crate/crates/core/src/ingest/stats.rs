use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetKind, EntityKind};
use crate::error::{Error, Result};

/// Descriptive statistics of a dataset's positive interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_ratings: usize,
    pub n_items: usize,
    pub n_users: usize,
    pub density: f64,
    pub avg_ratings_per_item: f64,
    pub avg_ratings_per_user: f64,
    pub min_ratings_per_item: usize,
    pub min_ratings_per_user: usize,
    pub max_ratings_per_item: usize,
    pub max_ratings_per_user: usize,
    /// Explicit datasets only.
    pub avg_rating: Option<f64>,
}

impl DatasetStats {
    pub fn compute(data: &Dataset) -> Result<Self> {
        let positives = data.filter(|it| it.is_positive());
        if positives.is_empty() {
            return Err(Error::Empty);
        }
        let per_user: Vec<usize> = positives.counts(EntityKind::User).into_iter().map(|c| c.1).collect();
        let per_item: Vec<usize> = positives.counts(EntityKind::Item).into_iter().map(|c| c.1).collect();
        let n_ratings = positives.len();
        let n_users = per_user.len();
        let n_items = per_item.len();
        let avg_rating = match data.kind() {
            DatasetKind::Explicit => {
                Some(positives.interactions().iter().map(|it| it.rating).sum::<f64>() / n_ratings as f64)
            }
            DatasetKind::Implicit => None,
        };
        Ok(DatasetStats {
            n_ratings,
            n_items,
            n_users,
            density: n_ratings as f64 / (n_users as f64 * n_items as f64),
            avg_ratings_per_item: n_ratings as f64 / n_items as f64,
            avg_ratings_per_user: n_ratings as f64 / n_users as f64,
            min_ratings_per_item: per_item.iter().copied().min().unwrap_or(0),
            min_ratings_per_user: per_user.iter().copied().min().unwrap_or(0),
            max_ratings_per_item: per_item.iter().copied().max().unwrap_or(0),
            max_ratings_per_user: per_user.iter().copied().max().unwrap_or(0),
            avg_rating,
        })
    }

    /// Rows as (label, formatted value), in table order.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let mut rows = vec![
            ("# Ratings", group_thousands(self.n_ratings)),
            ("# Items", group_thousands(self.n_items)),
            ("# Users", group_thousands(self.n_users)),
            ("Density", format_density(self.density)),
            ("Average # ratings/item", format!("{:.2}", self.avg_ratings_per_item)),
            ("Average # ratings/user", format!("{:.2}", self.avg_ratings_per_user)),
            ("Min # ratings/item", self.min_ratings_per_item.to_string()),
            ("Min # ratings/user", self.min_ratings_per_user.to_string()),
            ("Max # ratings/item", self.max_ratings_per_item.to_string()),
            ("Max # ratings/user", self.max_ratings_per_user.to_string()),
        ];
        if let Some(avg) = self.avg_rating {
            rows.push(("Average rating", format!("{avg:.2}")));
        }
        rows
    }

    /// Two-column aligned text table.
    pub fn to_table(&self, title: &str) -> String {
        let rows = self.rows();
        let label_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("Metric".len());
        let value_w = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(title.len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<label_w$} | {:>value_w$}", "Metric", title);
        let _ = writeln!(out, "{}", "-".repeat(label_w + value_w + 3));
        for (label, value) in rows {
            let _ = writeln!(out, "{label:<label_w$} | {value:>value_w$}");
        }
        out
    }
}

fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn format_density(d: f64) -> String {
    if d >= 1e-3 {
        format!("{d:.3}")
    } else {
        let s = format!("{d:.2e}");
        match s.split_once('e') {
            Some((mantissa, exp)) => {
                let exp: i32 = exp.parse().unwrap_or(0);
                let sign = if exp < 0 { '-' } else { '+' };
                format!("{mantissa}e{sign}{:02}", exp.abs())
            }
            None => s,
        }
    }
}
