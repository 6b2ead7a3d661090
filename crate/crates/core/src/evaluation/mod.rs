//! Metrics, leave-one-user-out cross-validation and grid search.

mod experiment;
mod gridsearch;
mod louo;
mod metrics;
mod report;

pub use experiment::{Experiment, RunSeeds};
pub use gridsearch::{gridsearch, GridReport, GridRow, GridSpec};
pub use louo::{louo, Fold, LouoOutcome};
pub use metrics::{
    dataset_accuracy, distance, frame_accuracy, mae, mean, rmse, summarize, Metrics,
    TrajectoryMetrics, MM_PER_M, TRAJECTORY_COLUMNS,
};
pub use report::{EvalReport, FoldRow};
