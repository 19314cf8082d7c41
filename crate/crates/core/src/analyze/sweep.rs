use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chemper::{build_graph_tensors, FeatureConfig};
use crate::model::{predict, ModelParams};
use crate::molio::{DatasetRecord, Molecule, Task};
use crate::train::{derive_seed, metrics, Metrics, SeedStream, TargetScaler};
use crate::{Error, Result};

use super::rotation::{random_rotation, rotate_molecule, rotation_matrix, Axis, Mat3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationMode {
    /// Every axis at `0, step, 2·step, …` degrees.
    Stepwise,
    /// One random three-axis rotation per molecule.
    Random,
    /// One axis at a fine step, one molecule at a time.
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub mode: RotationMode,
    pub axis: Axis,
    pub step_degrees: f64,
    pub seed: u64,
}

impl RotationSpec {
    pub fn stepwise(seed: u64) -> Self {
        Self {
            mode: RotationMode::Stepwise,
            axis: Axis::Z,
            step_degrees: 45.0,
            seed,
        }
    }

    pub fn fine(axis: Axis) -> Self {
        Self {
            mode: RotationMode::Fine,
            axis,
            step_degrees: 5.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.step_degrees;
        if !(s > 0.0 && s <= 360.0) || (360.0 / s).fract() != 0.0 {
            return Err(Error::Config(format!("rotation step {s}° must divide 360°")));
        }
        Ok(())
    }

    pub fn angles(&self) -> Vec<f64> {
        let n = (360.0 / self.step_degrees).round() as usize;
        (0..n).map(|k| k as f64 * self.step_degrees).collect()
    }
}

/// A trained model together with the inputs it is evaluated on.
#[derive(Debug, Clone)]
pub struct SweepModel<'a> {
    pub params: &'a ModelParams,
    pub scaler: &'a TargetScaler,
    pub features: &'a FeatureConfig,
    pub records: &'a [DatasetRecord],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `x`, `y`, `z` or `random`.
    pub axis: String,
    /// Rotation angle; empty for the random row.
    pub degrees: Option<f64>,
    pub metric: String,
    /// Mean over the models.
    pub value: f64,
    /// Standard error of the mean over models; empty for a single model.
    pub stderr: Option<f64>,
}

/// Predictions in original units / probabilities for molecules rotated by
/// `rotation(k)` (the k-th record's matrix, `None` for untouched input).
pub fn evaluate_rotated(model: &SweepModel<'_>, rotation: impl Fn(usize) -> Option<Mat3> + Sync) -> Result<Vec<f64>> {
    model
        .records
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let mol = match rotation(k) {
                Some(q) => rotate_molecule(&r.molecule, &q),
                None => r.molecule.clone(),
            };
            predict_one(model.params, model.scaler, model.features, &mol)
        })
        .collect()
}

pub fn predict_one(
    params: &ModelParams,
    scaler: &TargetScaler,
    features: &FeatureConfig,
    mol: &Molecule,
) -> Result<f64> {
    let g = build_graph_tensors(mol, features)?;
    let p = predict(&g, params)?;
    Ok(match params.config().task {
        Task::Regression => scaler.inverse(p.raw),
        Task::Classification => p.output,
    })
}

fn model_metrics(model: &SweepModel<'_>, preds: &[f64]) -> Result<Metrics> {
    let targets: Vec<f64> = model.records.iter().map(|r| r.target).collect();
    metrics(preds, &targets, model.params.config().task)
}

fn row(axis: String, degrees: Option<f64>, per_model: &[Metrics]) -> SweepRow {
    let (metric, _) = per_model[0].primary();
    let values: Vec<f64> = per_model.iter().map(|m| m.primary().1).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt());
    SweepRow {
        axis,
        degrees,
        metric: metric.to_string(),
        value: mean,
        stderr,
    }
}

fn check_models(models: &[SweepModel<'_>]) -> Result<()> {
    if models.is_empty() || models.iter().any(|m| m.records.is_empty()) {
        return Err(Error::Dataset(
            "rotation sweep needs at least one model with test records".into(),
        ));
    }
    Ok(())
}

/// Metric at every stepwise angle of every axis.
pub fn stepwise_rows(models: &[SweepModel<'_>], spec: &RotationSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    check_models(models)?;
    let mut rows = Vec::new();
    for axis in Axis::ALL {
        for deg in spec.angles() {
            let q = rotation_matrix(axis, deg);
            let per_model = models
                .iter()
                .map(|m| model_metrics(m, &evaluate_rotated(m, |_| Some(q))?))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row(axis.to_string(), Some(deg), &per_model));
        }
    }
    Ok(rows)
}

/// Metric with an independent random three-axis rotation for every
/// molecule; record `k` uses `random_rotation(derive_seed(seed, Rotation, k))`.
pub fn random_row(models: &[SweepModel<'_>], seed: u64) -> Result<SweepRow> {
    check_models(models)?;
    let per_model = models
        .iter()
        .map(|m| {
            let preds = evaluate_rotated(m, |k| {
                Some(random_rotation(derive_seed(seed, SeedStream::Rotation, k as u64)))
            })?;
            model_metrics(m, &preds)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(row("random".into(), None, &per_model))
}

/// The full table: every stepwise row, then the random row. Models are only
/// read.
pub fn rotation_sweep(models: &[SweepModel<'_>], spec: &RotationSpec) -> Result<Vec<SweepRow>> {
    let mut rows = stepwise_rows(models, spec)?;
    rows.push(random_row(models, spec.seed)?);
    Ok(rows)
}

/// Prediction of one molecule at every fine step about `spec.axis`.
pub fn fine_sweep(
    params: &ModelParams,
    scaler: &TargetScaler,
    features: &FeatureConfig,
    molecule: &Molecule,
    spec: &RotationSpec,
) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    spec.angles()
        .par_iter()
        .map(|&deg| {
            let mol = rotate_molecule(molecule, &rotation_matrix(spec.axis, deg));
            Ok((deg, predict_one(params, scaler, features, &mol)?))
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct FineRow<'a> {
    id: &'a str,
    degrees: f64,
    prediction: f64,
}

/// `(id, series)` pairs as `id,degrees,prediction` rows.
pub fn write_fine_csv(series: &[(String, Vec<(f64, f64)>)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for (id, s) in series {
        for &(degrees, prediction) in s {
            w.serialize(FineRow {
                id,
                degrees,
                prediction,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
