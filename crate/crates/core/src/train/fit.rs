use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chemper::{build_graph_tensors, FeatureConfig, GraphTensors};
use crate::model::{backward, forward, init_params, Gradients, ModelConfig, ModelParams};
use crate::molio::{DatasetRecord, Task};
use crate::{Error, Result};

use super::adam::{adam_step, AdamState};
use super::folds::{FoldAssignment, FoldSplit};
use super::loss::loss;
use super::metrics::{metrics, Metrics};
use super::scaler::TargetScaler;
use super::scheduler::PlateauScheduler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub decay_factor: f64,
    pub plateau_patience: usize,
    pub stop_patience: usize,
    /// Smallest absolute drop in validation loss that counts as progress.
    pub improvement_threshold: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub folds: usize,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 0.001,
            min_learning_rate: 0.0005,
            decay_factor: 0.9,
            plateau_patience: 10,
            stop_patience: 15,
            improvement_threshold: 1e-4,
            max_epochs: 500,
            seed: 0,
            folds: 10,
            threads: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.min_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.min_learning_rate > self.learning_rate {
            return bad("min_learning_rate exceeds learning_rate");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay_factor must lie in (0, 1]");
        }
        if self.plateau_patience == 0 || self.stop_patience == 0 {
            return bad("patiences must be positive");
        }
        if !(self.improvement_threshold >= 0.0) {
            return bad("improvement_threshold must be non-negative");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.folds < 3 {
            return bad("folds must be at least 3");
        }
        Ok(())
    }

    pub fn scheduler(&self) -> PlateauScheduler {
        PlateauScheduler::new(
            self.learning_rate,
            self.min_learning_rate,
            self.decay_factor,
            self.plateau_patience,
            self.stop_patience,
            self.improvement_threshold,
        )
    }
}

/// Independent random streams derived from one base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedStream {
    Split = 1,
    Fold = 2,
    Init = 3,
    Shuffle = 4,
    Rotation = 5,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `splitmix64(splitmix64(base + stream) + index)`: the seed of the
/// `index`-th use of `stream`. Fold `f` of a cross-validation run trains with
/// base seed `derive_seed(seed, Fold, f)`, from which `fit` draws its init
/// and shuffle seeds with index 0.
pub fn derive_seed(base: u64, stream: SeedStream, index: u64) -> u64 {
    splitmix64(splitmix64(base.wrapping_add(stream as u64)).wrapping_add(index))
}

/// A featurized molecule and its target in original units.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub graph: GraphTensors,
    pub target: f64,
}

pub fn prepare_samples(records: &[DatasetRecord], features: &FeatureConfig) -> Result<Vec<Sample>> {
    records
        .par_iter()
        .map(|r| {
            Ok(Sample {
                id: r.id().to_string(),
                graph: build_graph_tensors(&r.molecule, features)?,
                target: r.target,
            })
        })
        .collect()
}

/// Runs `f` on a pool of `threads` workers (0 keeps the current pool).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    /// Snapshot with the lowest validation loss (strictly lowest, not
    /// subject to the scheduler's improvement threshold).
    pub params: ModelParams,
    pub scaler: TargetScaler,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Model outputs in original target units (regression) or as probabilities.
pub fn predict_samples(params: &ModelParams, scaler: &TargetScaler, samples: &[Sample]) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|s| {
            let (p, _) = forward(&s.graph, params)?;
            Ok(match params.config().task {
                Task::Regression => scaler.inverse(p.raw),
                Task::Classification => p.output,
            })
        })
        .collect()
}

/// Mean training loss of `samples` (standardized targets for regression).
pub fn mean_loss(params: &ModelParams, scaler: &TargetScaler, samples: &[Sample]) -> Result<f64> {
    let task = params.config().task;
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let (p, _) = forward(&s.graph, params)?;
            Ok(loss(p.raw, scaler.apply(s.target), task)?.0)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::Numeric(message) => Error::Divergence { epoch, message },
        other => other,
    }
}

/// Mini-batch Adam on `train`, scheduling and early stopping on `val`.
/// Per-molecule gradients are summed in batch order whatever the thread
/// count, so a fixed seed gives a bit-identical run.
pub fn fit(train: &[Sample], val: &[Sample], model: &ModelConfig, cfg: &TrainConfig) -> Result<FitOutput> {
    fit_observed(train, val, model, cfg, |_| Ok(()))
}

/// [`fit`], calling `on_epoch` after every epoch (e.g. to stream the log so
/// it survives a divergence).
pub fn fit_observed(
    train: &[Sample],
    val: &[Sample],
    model: &ModelConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog) -> Result<()> + Send,
) -> Result<FitOutput> {
    cfg.validate()?;
    model.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Dataset("training and validation sets must be nonempty".into()));
    }
    with_threads(cfg.threads, || fit_inner(train, val, model, cfg, on_epoch))?
}

fn fit_inner(
    train: &[Sample],
    val: &[Sample],
    model: &ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog) -> Result<()>,
) -> Result<FitOutput> {
    let task = model.task;
    let targets: Vec<f64> = train.iter().map(|s| s.target).collect();
    let scaler = TargetScaler::fit(&targets, task)?;
    let scaled: Vec<f64> = targets.iter().map(|&t| scaler.apply(t)).collect();
    for &t in &scaled {
        loss(0.0, t, task)?;
    }

    let mut params = init_params(model, derive_seed(cfg.seed, SeedStream::Init, 0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SeedStream::Shuffle, 0));
    let mut adam = AdamState::new(&params);
    let mut sched = cfg.scheduler();
    let mut lr = cfg.learning_rate;
    let mut best: Option<(ModelParams, usize)> = None;
    let mut best_val = f64::INFINITY;
    let mut log = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let per_mol: Vec<(f64, Gradients)> = batch
                .par_iter()
                .map(|&i| {
                    let (pred, cache) = forward(&train[i].graph, &params)?;
                    let (l, d) = loss(pred.raw, scaled[i], task)?;
                    Ok((l, backward(&params, &cache, d)?))
                })
                .collect::<Result<_>>()
                .map_err(|e| diverged(epoch, e))?;
            let mut iter = per_mol.into_iter();
            let (l0, mut g) = iter.next().expect("nonempty batch");
            loss_sum += l0;
            for (l, gi) in iter {
                loss_sum += l;
                g.add_assign(&gi);
            }
            g.scale(1.0 / batch.len() as f64);
            if !g.max_abs().is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: "non-finite gradient".into(),
                });
            }
            adam_step(&mut params, &g, &mut adam, lr)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = mean_loss(&params, &scaler, val).map_err(|e| diverged(epoch, e))?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: format!("train loss {train_loss}, validation loss {val_loss}"),
            });
        }
        let entry = EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr,
        };
        on_epoch(&entry)?;
        log.push(entry);
        let d = sched.observe(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best = Some((params.clone(), epoch));
        }
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} lr {lr}");
        lr = d.lr;
        if d.stop {
            stopped_early = true;
            break;
        }
    }
    let (params, best_epoch) = best.unwrap_or((params, log.len()));
    Ok(FitOutput {
        params,
        scaler,
        log,
        best_epoch,
        stopped_early,
    })
}

pub fn write_log_csv(log: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fit and test one cross-validation fold.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub split: FoldSplit,
    pub fit: FitOutput,
    pub test_predictions: Vec<f64>,
    pub metrics: Metrics,
}

pub fn run_fold(
    samples: &[Sample],
    assignment: &FoldAssignment,
    fold: usize,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<FoldOutcome> {
    run_fold_observed(samples, assignment, fold, model, cfg, |_| Ok(()))
}

pub fn run_fold_observed(
    samples: &[Sample],
    assignment: &FoldAssignment,
    fold: usize,
    model: &ModelConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog) -> Result<()> + Send,
) -> Result<FoldOutcome> {
    if assignment.groups.len() != samples.len() {
        return Err(Error::dim("fold assignment does not cover the samples"));
    }
    let split = assignment.split(fold)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let (train, val, test) = (pick(&split.train), pick(&split.val), pick(&split.test));
    if test.is_empty() {
        return Err(Error::Dataset(format!("fold {fold} has an empty test set")));
    }
    let fold_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, SeedStream::Fold, fold as u64),
        ..cfg.clone()
    };
    let fit = fit_observed(&train, &val, model, &fold_cfg, on_epoch)?;
    let test_predictions = with_threads(cfg.threads, || predict_samples(&fit.params, &fit.scaler, &test))??;
    let targets: Vec<f64> = test.iter().map(|s| s.target).collect();
    let metrics = metrics(&test_predictions, &targets, model.task)?;
    Ok(FoldOutcome {
        fold,
        split,
        fit,
        test_predictions,
        metrics,
    })
}
