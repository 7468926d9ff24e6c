use super::EvalError;
use crate::Label;

/// Confusion counts with malicious (+1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    /// Set when precision or recall had a zero denominator.
    pub degenerate: bool,
}

// 0/0 is 1.0 only when nothing was there to find and nothing was claimed.
fn ratio(num: usize, den: usize, vacuous: bool) -> f64 {
    if den == 0 {
        if vacuous {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self, EvalError> {
        let ConfusionCounts { tp, fp, tn, fn_ } = counts;
        if counts.total() == 0 {
            return Err(EvalError::Empty);
        }
        let vacuous = tp + fp == 0 && tp + fn_ == 0;
        let precision = ratio(tp, tp + fp, vacuous);
        let recall = ratio(tp, tp + fn_, vacuous);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Ok(MetricsReport {
            accuracy: (tp + tn) as f64 / counts.total() as f64,
            precision,
            recall,
            f1,
            counts,
            degenerate: tp + fp == 0 || tp + fn_ == 0,
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
        }
    }
}

pub fn compute_metrics(predictions: &[Label], labels: &[Label]) -> Result<MetricsReport, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (Label::Malicious, Label::Malicious) => counts.tp += 1,
            (Label::Malicious, Label::Benign) => counts.fp += 1,
            (Label::Benign, Label::Benign) => counts.tn += 1,
            (Label::Benign, Label::Malicious) => counts.fn_ += 1,
        }
    }
    MetricsReport::from_counts(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
        }
    }
}

/// Worst, best, mean and sample standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub worst: f64,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        // Rounding in the mean can push it a hair outside [worst, best].
        Some(MetricStats { worst, best, mean: mean.clamp(worst, best), std })
    }
}

/// Per-run reports of one method and their summary rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatSummary {
    pub runs: Vec<MetricsReport>,
    pub accuracy: MetricStats,
    pub precision: MetricStats,
    pub recall: MetricStats,
    pub f1: MetricStats,
}

impl RepeatSummary {
    pub fn new(runs: Vec<MetricsReport>) -> Result<Self, EvalError> {
        let stats = |m: Metric| {
            let values: Vec<f64> = runs.iter().map(|r| r.get(m)).collect();
            MetricStats::from_values(&values).ok_or(EvalError::Empty)
        };
        Ok(RepeatSummary {
            accuracy: stats(Metric::Accuracy)?,
            precision: stats(Metric::Precision)?,
            recall: stats(Metric::Recall)?,
            f1: stats(Metric::F1)?,
            runs,
        })
    }

    pub fn stats(&self, metric: Metric) -> &MetricStats {
        match metric {
            Metric::Accuracy => &self.accuracy,
            Metric::Precision => &self.precision,
            Metric::Recall => &self.recall,
            Metric::F1 => &self.f1,
        }
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }
}
