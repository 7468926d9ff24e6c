use rand::seq::SliceRandom;

use super::EvalError;
use crate::vectorize::Dataset;
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.6, validation_fraction: 0.2, test_fraction: 0.2, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fractions = [self.train_fraction, self.validation_fraction, self.test_fraction];
        if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(EvalError::InvalidSpec(format!("split fractions must be positive, got {fractions:?}")));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidSpec(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Positions of the samples in each part, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

fn part_size(fraction: f64, n: usize) -> usize {
    // The epsilon keeps 0.2 * 5 from landing on 0.9999...
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Stratified split: each class is shuffled on its own and cut into
/// validation and test blocks of `floor(fraction * class size)`; the
/// remainder goes to train.
pub fn split_indices(labels: &[Label], spec: &SplitSpec) -> Result<SplitIndices, EvalError> {
    spec.validate()?;
    if labels.len() < 5 {
        return Err(EvalError::TooSmall { size: labels.len() });
    }
    let mut rng = crate::seed::rng(spec.seed);
    let mut parts = SplitIndices { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
    for class in [Label::Malicious, Label::Benign] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n_val = part_size(spec.validation_fraction, members.len());
        let n_test = part_size(spec.test_fraction, members.len());
        parts.validation.extend_from_slice(&members[..n_val]);
        parts.test.extend_from_slice(&members[n_val..n_val + n_test]);
        parts.train.extend_from_slice(&members[n_val + n_test..]);
    }
    parts.train.sort_unstable();
    parts.validation.sort_unstable();
    parts.test.sort_unstable();
    Ok(parts)
}

/// Splits a labeled dataset into (train, validation, test).
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), EvalError> {
    let labels = data.labels().ok_or(EvalError::Unlabeled)?;
    let parts = split_indices(&labels, spec)?;
    Ok((data.select(&parts.train), data.select(&parts.validation), data.select(&parts.test)))
}
