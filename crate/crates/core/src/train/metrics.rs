use serde::{Deserialize, Serialize};

use crate::molio::Task;
use crate::{Error, Result};

/// Evaluation metrics of one prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metrics {
    Regression {
        #[serde(rename = "MAE")]
        mae: f64,
        #[serde(rename = "RMSE")]
        rmse: f64,
    },
    Classification {
        #[serde(rename = "AUC-ROC")]
        auc_roc: f64,
        #[serde(rename = "AUC-PR")]
        auc_pr: f64,
    },
}

impl Metrics {
    pub fn entries(&self) -> [(&'static str, f64); 2] {
        match *self {
            Metrics::Regression { mae, rmse } => [("MAE", mae), ("RMSE", rmse)],
            Metrics::Classification { auc_roc, auc_pr } => [("AUC-ROC", auc_roc), ("AUC-PR", auc_pr)],
        }
    }

    /// RMSE or AUC-ROC, the figure each task is judged by.
    pub fn primary(&self) -> (&'static str, f64) {
        match *self {
            Metrics::Regression { rmse, .. } => ("RMSE", rmse),
            Metrics::Classification { auc_roc, .. } => ("AUC-ROC", auc_roc),
        }
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim(format!("{} predictions for {} targets", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::UndefinedMetric("no predictions".into()));
    }
    Ok(())
}

pub fn mae_rmse(predictions: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    check_lengths(predictions, targets)?;
    let n = predictions.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, t) in predictions.iter().zip(targets) {
        abs += (p - t).abs();
        sq += (p - t).powi(2);
    }
    Ok((abs / n, (sq / n).sqrt()))
}

fn labels(targets: &[f64]) -> Result<(Vec<bool>, usize)> {
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        out.push(match t {
            x if x == 1.0 => true,
            x if x == 0.0 => false,
            other => {
                return Err(Error::Dataset(format!(
                    "classification target must be 0 or 1, got {other}"
                )))
            }
        });
    }
    let pos = out.iter().filter(|&&b| b).count();
    if pos == 0 || pos == out.len() {
        return Err(Error::UndefinedMetric("AUC needs both classes present".into()));
    }
    Ok((out, pos))
}

/// Area under the ROC curve from the rank-sum statistic, tied scores
/// sharing their mean rank.
pub fn auc_roc(scores: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(scores, targets)?;
    let (lab, pos) = labels(targets)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| lab[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, (n - pos) as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Area under the precision-recall curve as a step sum: at each distinct
/// threshold, from the highest score down, precision times the recall gained.
pub fn auc_pr(scores: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(scores, targets)?;
    let (lab, pos) = labels(targets)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            if lab[k] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(area)
}

/// `predictions` are in original target units for regression and
/// probabilities for classification.
pub fn metrics(predictions: &[f64], targets: &[f64], task: Task) -> Result<Metrics> {
    match task {
        Task::Regression => {
            let (mae, rmse) = mae_rmse(predictions, targets)?;
            Ok(Metrics::Regression { mae, rmse })
        }
        Task::Classification => Ok(Metrics::Classification {
            auc_roc: auc_roc(predictions, targets)?,
            auc_pr: auc_pr(predictions, targets)?,
        }),
    }
}

/// Mean and sample standard deviation of one metric across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    /// `None` with fewer than two folds.
    pub sd: Option<f64>,
    pub values: Vec<f64>,
}

pub fn summarize(per_fold: &[Metrics]) -> Vec<MetricSummary> {
    let Some(first) = per_fold.first() else {
        return Vec::new();
    };
    (0..2)
        .map(|k| {
            let values: Vec<f64> = per_fold.iter().map(|m| m.entries()[k].1).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd =
                (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
            MetricSummary {
                name: first.entries()[k].0.to_string(),
                mean,
                sd,
                values,
            }
        })
        .collect()
}
