//! Binary classification metrics with `Match` as the positive class.
//!
//! Weighted scores are support-weighted averages of the two per-class
//! scores. Any ratio with a zero denominator is 0.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClaimPair, Label};
use crate::parsing::{ParseStatus, Prediction};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("pair id {0} present in only one of predictions and gold")]
    IdMismatch(String),
    #[error("duplicate pair id {0}")]
    DuplicateId(String),
    #[error("no reports to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n: usize,
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub fallback_rate: f64,
    pub positive: ClassScores,
    pub negative: ClassScores,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_scores(tp: usize, fp: usize, fn_: usize) -> ClassScores {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassScores {
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

impl MetricsReport {
    /// Builds a report from confusion counts.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize, n_fallback: usize) -> Self {
        let n = tp + fp + tn + fn_;
        let positive = class_scores(tp, fp, fn_);
        // Negative class: its true positives are tn.
        let negative = class_scores(tn, fn_, fp);
        let weighted = |f: fn(&ClassScores) -> f64| {
            if n == 0 {
                0.0
            } else {
                (f(&positive) * positive.support as f64 + f(&negative) * negative.support as f64) / n as f64
            }
        };
        Self {
            tp,
            fp,
            tn,
            fn_,
            n,
            accuracy: ratio(tp + tn, n),
            f1_weighted: weighted(|c| c.f1),
            precision_weighted: weighted(|c| c.precision),
            recall_weighted: weighted(|c| c.recall),
            fallback_rate: ratio(n_fallback, n),
            positive,
            negative,
        }
    }
}

/// Scores `preds` against `gold`; both must cover the same pair ids exactly
/// once.
pub fn compute_metrics(preds: &[Prediction], gold: &[ClaimPair]) -> Result<MetricsReport, MetricsError> {
    let mut gold_labels: HashMap<&str, Label> = HashMap::with_capacity(gold.len());
    for pair in gold {
        if gold_labels.insert(&pair.pair_id, pair.label).is_some() {
            return Err(MetricsError::DuplicateId(pair.pair_id.clone()));
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(preds.len());
    let (mut tp, mut fp, mut tn, mut fn_, mut fallback) = (0, 0, 0, 0, 0);
    for pred in preds {
        if !seen.insert(pred.pair_id.as_str()) {
            return Err(MetricsError::DuplicateId(pred.pair_id.clone()));
        }
        let truth = *gold_labels
            .get(pred.pair_id.as_str())
            .ok_or_else(|| MetricsError::IdMismatch(pred.pair_id.clone()))?;
        match (truth, pred.label) {
            (Label::Match, Label::Match) => tp += 1,
            (Label::NoMatch, Label::Match) => fp += 1,
            (Label::NoMatch, Label::NoMatch) => tn += 1,
            (Label::Match, Label::NoMatch) => fn_ += 1,
        }
        if pred.parse_status == ParseStatus::FallbackNegative {
            fallback += 1;
        }
    }
    if let Some(missing) = gold.iter().find(|p| !seen.contains(p.pair_id.as_str())) {
        return Err(MetricsError::IdMismatch(missing.pair_id.clone()));
    }
    Ok(MetricsReport::from_counts(tp, fp, tn, fn_, fallback))
}

/// Identifies a run in a comparison table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabel {
    pub run_id: String,
    pub model: String,
    pub template: String,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run_id: String,
    pub model: String,
    pub template: String,
    pub mode: String,
    pub f1_weighted: f64,
    pub accuracy: f64,
}

/// Rows sorted by weighted F1 (descending), then accuracy (descending), then
/// run id.
pub fn compare_runs(reports: &[(RunLabel, MetricsReport)]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(label, report)| ComparisonRow {
            run_id: label.run_id.clone(),
            model: label.model.clone(),
            template: label.template.clone(),
            mode: label.mode.clone(),
            f1_weighted: report.f1_weighted,
            accuracy: report.accuracy,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.f1_weighted
            .total_cmp(&a.f1_weighted)
            .then(b.accuracy.total_cmp(&a.accuracy))
            .then_with(|| a.run_id.cmp(&b.run_id))
    });
    rows
}

/// Plain-text table with percentages to one decimal place.
pub fn render_table(rows: &[ComparisonRow]) -> String {
    let header = ["model", "template", "mode", "F1, %", "Acc., %"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.template.clone(),
                r.mode.clone(),
                format!("{:.1}", r.f1_weighted * 100.0),
                format!("{:.1}", r.accuracy * 100.0),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let rendered: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i >= 3 {
                    format!("{c:>w$}")
                } else {
                    format!("{c:<w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", rendered.join("  ").trim_end());
    };
    line(&header);
    for row in &body {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Mean and standard error over repeated runs of the same setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_runs: usize,
    pub mean_f1: f64,
    /// Sample standard deviation over sqrt(n); absent for a single run.
    pub std_error_f1: Option<f64>,
    pub mean_accuracy: f64,
    pub std_error_accuracy: Option<f64>,
}

fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Aggregate, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::Empty);
    }
    let f1: Vec<f64> = reports.iter().map(|r| r.f1_weighted).collect();
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let (mean_f1, std_error_f1) = mean_and_se(&f1);
    let (mean_accuracy, std_error_accuracy) = mean_and_se(&acc);
    Ok(Aggregate {
        n_runs: reports.len(),
        mean_f1,
        std_error_f1,
        mean_accuracy,
        std_error_accuracy,
    })
}
