//! Splitting, label noise, metrics and the repeated robustness experiment.

mod config;
mod experiment;
mod metrics;
mod noise;
mod split;
mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, read_config, DataSource, ExperimentConfig, NoiseScope};
pub use experiment::{
    prepare_run, repeated_experiment, run_once, write_experiment_report, ExperimentReport, Method, PreparedRun,
    RunOutcome, RunResult,
};
pub use metrics::{compute_metrics, ConfusionCounts, Metric, MetricStats, MetricsReport, RepeatSummary};
pub use noise::{flip_indices, inject_label_noise, NoiseSpec, NoiseTarget, NoisyDataset};
pub use split::{split, split_indices, SplitIndices, SplitSpec};
pub use synthetic::{planted_dataset, SyntheticSpec};

use crate::apk::RecordError;
use crate::ensemble::EnsembleError;
use crate::ga::GaError;
use crate::learner::LearnerError;
use crate::vectorize::VectorizeError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset has {size} samples, at least 5 are needed to split")]
    TooSmall { size: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("dataset has unlabeled samples")]
    Unlabeled,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no predictions to score")]
    Empty,
    #[error("invalid config key {key:?}: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error("config line {line}: {reason}")]
    ConfigFormat { line: usize, reason: String },
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error("every run failed")]
    AllRunsFailed,
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
