use std::str::FromStr;

use super::GaError;
use crate::ensemble::{EnsembleError, EnsemblePool, WeightVector};
use crate::learner::Classifier;
use crate::vectorize::Dataset;
use crate::Label;

/// `N x M` table of learner predictions in {-1, +1}, row per learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionMatrix {
    learners: usize,
    samples: usize,
    values: Vec<i8>,
}

impl PredictionMatrix {
    /// Predictions of every pool member on every sample of `data`.
    pub fn from_pool(pool: &EnsemblePool, data: &Dataset) -> Result<Self, EnsembleError> {
        let mut values = Vec::with_capacity(pool.len() * data.len());
        for (index, learner) in pool.learners().iter().enumerate() {
            for x in data {
                let label = learner
                    .predict_label(x)
                    .map_err(|source| EnsembleError::Learner { index, source })?;
                values.push(label.sign());
            }
        }
        Ok(PredictionMatrix { learners: pool.len(), samples: data.len(), values })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self, GaError> {
        let learners = rows.len();
        if learners == 0 {
            return Err(GaError::InvalidMatrix("no rows".into()));
        }
        let samples = rows[0].len();
        if rows.iter().any(|r| r.len() != samples) {
            return Err(GaError::InvalidMatrix("rows differ in length".into()));
        }
        if rows.iter().flatten().any(|&v| v != 1 && v != -1) {
            return Err(GaError::InvalidMatrix("entries must be +1 or -1".into()));
        }
        Ok(PredictionMatrix { learners, samples, values: rows.concat() })
    }

    pub fn learners(&self) -> usize {
        self.learners
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn row(&self, learner: usize) -> &[i8] {
        &self.values[learner * self.samples..(learner + 1) * self.samples]
    }

    pub fn get(&self, learner: usize, sample: usize) -> i8 {
        self.values[learner * self.samples + sample]
    }

    /// Majority vote of the rows selected by `omega`, per sample.
    pub fn votes(&self, omega: &WeightVector) -> Result<Vec<Label>, GaError> {
        check_omega(self.learners, omega)?;
        let selected: Vec<usize> = omega.selected().collect();
        Ok((0..self.samples)
            .map(|k| {
                let sum: i64 = selected.iter().map(|&i| self.get(i, k) as i64).sum();
                Label::from_sign(sum)
            })
            .collect())
    }

    fn disagreements(&self, a: usize, b: usize) -> usize {
        self.row(a).iter().zip(self.row(b)).filter(|(x, y)| x != y).count()
    }
}

/// Denominator applied to the summed pair distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiversityNorm {
    /// Divide by the number of selected learners.
    #[default]
    Paper,
    /// Divide by the number of selected pairs (mean pair distance).
    Pairs,
}

impl DiversityNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            DiversityNorm::Paper => "paper",
            DiversityNorm::Pairs => "pairs",
        }
    }
}

impl FromStr for DiversityNorm {
    type Err = GaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(DiversityNorm::Paper),
            "pairs" => Ok(DiversityNorm::Pairs),
            other => Err(GaError::InvalidConfig(format!("unknown diversity_norm {other:?}"))),
        }
    }
}

fn check_omega(learners: usize, omega: &WeightVector) -> Result<(), GaError> {
    if omega.len() != learners {
        return Err(GaError::LengthMismatch { expected: learners, found: omega.len() });
    }
    if omega.popcount() == 0 {
        return Err(GaError::AllZeroWeights);
    }
    Ok(())
}

fn normalize(pair_sum: f64, selected: usize, norm: DiversityNorm) -> f64 {
    match norm {
        DiversityNorm::Paper => pair_sum / selected as f64,
        DiversityNorm::Pairs if selected < 2 => 0.0,
        DiversityNorm::Pairs => pair_sum / (selected * (selected - 1) / 2) as f64,
    }
}

pub fn diversity(matrix: &PredictionMatrix, omega: &WeightVector) -> Result<f64, GaError> {
    diversity_with(matrix, omega, DiversityNorm::Paper)
}

/// Diversity factor of the learners selected by `omega`; zero for a single
/// selected learner.
pub fn diversity_with(matrix: &PredictionMatrix, omega: &WeightVector, norm: DiversityNorm) -> Result<f64, GaError> {
    check_omega(matrix.learners, omega)?;
    let selected: Vec<usize> = omega.selected().collect();
    let mut sum = 0.0;
    for (a, &i) in selected.iter().enumerate() {
        for &j in &selected[a + 1..] {
            sum += (4.0 * matrix.disagreements(i, j) as f64).sqrt();
        }
    }
    Ok(normalize(sum, selected.len(), norm))
}

fn vote_accuracy(matrix: &PredictionMatrix, labels: &[i8], selected: &[usize]) -> f64 {
    let correct = (0..matrix.samples)
        .filter(|&k| {
            let sum: i32 = selected.iter().map(|&i| matrix.get(i, k) as i32).sum();
            let vote = if sum >= 0 { 1 } else { -1 };
            vote == labels[k]
        })
        .count();
    correct as f64 / matrix.samples as f64
}

fn label_signs(matrix: &PredictionMatrix, labels: &[Label]) -> Result<Vec<i8>, GaError> {
    if labels.len() != matrix.samples {
        return Err(GaError::InvalidMatrix(format!(
            "{} labels for {} samples",
            labels.len(),
            matrix.samples
        )));
    }
    if labels.is_empty() {
        return Err(GaError::InvalidMatrix("no samples".into()));
    }
    Ok(labels.iter().map(|l| l.sign()).collect())
}

/// Majority-vote accuracy times the paper-normalized diversity.
pub fn fitness(matrix: &PredictionMatrix, labels: &[Label], omega: &WeightVector) -> Result<f64, GaError> {
    FitnessEvaluator::new(matrix, labels, DiversityNorm::Paper)?.fitness(omega)
}

/// Fitness with the pairwise distance table computed once.
#[derive(Debug, Clone)]
pub struct FitnessEvaluator<'a> {
    matrix: &'a PredictionMatrix,
    labels: Vec<i8>,
    distances: Vec<f64>,
    norm: DiversityNorm,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(matrix: &'a PredictionMatrix, labels: &[Label], norm: DiversityNorm) -> Result<Self, GaError> {
        let labels = label_signs(matrix, labels)?;
        let n = matrix.learners;
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = (4.0 * matrix.disagreements(i, j) as f64).sqrt();
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        Ok(FitnessEvaluator { matrix, labels, distances, norm })
    }

    pub fn learners(&self) -> usize {
        self.matrix.learners
    }

    pub fn accuracy(&self, omega: &WeightVector) -> Result<f64, GaError> {
        check_omega(self.matrix.learners, omega)?;
        let selected: Vec<usize> = omega.selected().collect();
        Ok(vote_accuracy(self.matrix, &self.labels, &selected))
    }

    pub fn diversity(&self, omega: &WeightVector) -> Result<f64, GaError> {
        check_omega(self.matrix.learners, omega)?;
        let n = self.matrix.learners;
        let selected: Vec<usize> = omega.selected().collect();
        let mut sum = 0.0;
        for (a, &i) in selected.iter().enumerate() {
            for &j in &selected[a + 1..] {
                sum += self.distances[i * n + j];
            }
        }
        Ok(normalize(sum, selected.len(), self.norm))
    }

    pub fn fitness(&self, omega: &WeightVector) -> Result<f64, GaError> {
        Ok(self.accuracy(omega)? * self.diversity(omega)?)
    }
}
