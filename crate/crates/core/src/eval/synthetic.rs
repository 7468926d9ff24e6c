use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EvalError;
use crate::vectorize::{Dataset, FeatureVector};
use crate::Label;

/// Balanced binary data labeled by a hidden linear rule plus score noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub features: usize,
    /// Probability that a feature is active.
    pub density: f64,
    /// Standard deviation of the score noise, relative to the standard
    /// deviation of the noiseless score.
    pub concept_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { samples: 2000, features: 50, density: 0.5, concept_noise: 0.3, seed: 0 }
    }
}

/// Draws weights `w ~ N(0, 1)` and features `x ~ Bernoulli(density)`, scores
/// each sample as `w.x + e`, and labels the higher-scoring half malicious.
pub fn planted_dataset(spec: &SyntheticSpec) -> Result<Dataset, EvalError> {
    if spec.samples < 2 || spec.features == 0 || spec.features > u32::MAX as usize {
        return Err(EvalError::InvalidSpec("synthetic data needs at least 2 samples and 1 feature".into()));
    }
    if !(spec.density > 0.0 && spec.density < 1.0) {
        return Err(EvalError::InvalidSpec(format!("density must lie in (0, 1), got {}", spec.density)));
    }
    if !(spec.concept_noise >= 0.0 && spec.concept_noise.is_finite()) {
        return Err(EvalError::InvalidSpec(format!("concept_noise must be non-negative, got {}", spec.concept_noise)));
    }
    let mut rng = crate::seed::rng(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let weights: Vec<f64> = (0..spec.features).map(|_| unit.sample(&mut rng)).collect();
    let signal_std = (spec.density * (1.0 - spec.density) * weights.iter().map(|w| w * w).sum::<f64>()).sqrt();
    let noise_std = spec.concept_noise * signal_std;

    let mut rows = Vec::with_capacity(spec.samples);
    let mut scores = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let active: Vec<u32> = (0..spec.features as u32).filter(|_| rng.gen_bool(spec.density)).collect();
        let score: f64 = active.iter().map(|&j| weights[j as usize]).sum::<f64>() + noise_std * unit.sample(&mut rng);
        rows.push(active);
        scores.push(score);
    }

    let mut order: Vec<usize> = (0..spec.samples).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut labels = vec![Label::Benign; spec.samples];
    for &i in &order[..spec.samples / 2] {
        labels[i] = Label::Malicious;
    }

    let vectors = rows
        .into_iter()
        .zip(labels)
        .map(|(active, label)| FeatureVector::new(spec.features, active, Some(label)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(spec.features, vectors)?)
}
