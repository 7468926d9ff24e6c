//! Component learners: logistic regression and a one-hidden-layer network,
//! both trained on logistic loss with seeded mini-batch SGD.
//!
//! Predictions follow the voting convention: +1 for malicious, -1 for
//! benign, and a margin of exactly zero maps to +1.

mod model;
mod serialize;
mod train;

use thiserror::Error;

use crate::vectorize::{Dataset, FeatureVector};
use crate::Label;

pub use model::TrainedLearner;
pub use serialize::{load_learner, read_learner, save_learner, write_learner};
pub use train::{train, train_with_history};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    Linear,
    Mlp,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Linear => "linear",
            LearnerKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(LearnerKind::Linear),
            "mlp" => Ok(LearnerKind::Mlp),
            other => Err(LearnerError::InvalidSpec(format!("unknown learner kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Ignored by the linear learner.
    pub hidden_units: usize,
    pub l2: f64,
    /// Samples per gradient step; 1 is plain SGD, `>= M` is full-batch
    /// gradient descent.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec {
            kind: LearnerKind::Linear,
            learning_rate: 0.05,
            epochs: 20,
            hidden_units: 16,
            l2: 1e-4,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |msg: &str| Err(LearnerError::InvalidSpec(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be a positive finite number");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.kind == LearnerKind::Mlp && self.hidden_units == 0 {
            return bad("hidden_units must be at least 1");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be a non-negative finite number");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid learner spec: {0}")]
    InvalidSpec(String),
    #[error("training data is empty")]
    EmptyDataset,
    #[error("training data has unlabeled samples")]
    Unlabeled,
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("loss became non-finite in epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("dimension mismatch: learner expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that scores a feature vector and votes with its sign.
pub trait Classifier {
    fn dimension(&self) -> usize;

    /// Pre-threshold score.
    fn decision_margin(&self, x: &FeatureVector) -> Result<f64, LearnerError>;

    fn predict_label(&self, x: &FeatureVector) -> Result<Label, LearnerError> {
        self.decision_margin(x).map(Label::from_margin)
    }
}

/// Fraction of labeled samples the classifier gets right.
pub fn accuracy(model: &impl Classifier, data: &Dataset) -> Result<f64, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyDataset);
    }
    let mut correct = 0usize;
    for x in data {
        let label = x.label().ok_or(LearnerError::Unlabeled)?;
        if model.predict_label(x)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
