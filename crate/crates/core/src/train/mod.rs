//! Losses, optimizer, schedules, cross-validation and metrics.

mod adam;
mod fit;
mod folds;
mod loss;
mod metrics;
mod scaler;
mod scheduler;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use fit::{
    derive_seed, fit, fit_observed, mean_loss, predict_samples, prepare_samples, run_fold, run_fold_observed,
    with_threads, write_log_csv, EpochLog, FitOutput, FoldOutcome, Sample, SeedStream, TrainConfig,
};
pub use folds::{stratified_folds, FoldAssignment, FoldSplit, REGRESSION_BINS};
pub use loss::loss;
pub use metrics::{auc_pr, auc_roc, mae_rmse, metrics, summarize, MetricSummary, Metrics};
pub use scaler::TargetScaler;
pub use scheduler::{plateau_schedule, Decision, PlateauScheduler};
