use std::str::FromStr;

use rand::seq::SliceRandom;

use super::EvalError;
use crate::vectorize::Dataset;
use crate::Label;

/// Split that label noise may target. The test split is deliberately not
/// representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseTarget {
    Train,
    Validation,
}

impl NoiseTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseTarget::Train => "train",
            NoiseTarget::Validation => "validation",
        }
    }
}

impl FromStr for NoiseTarget {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(NoiseTarget::Train),
            "validation" => Ok(NoiseTarget::Validation),
            other => Err(EvalError::InvalidSpec(format!("noise cannot target {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub flip_fraction: f64,
    pub seed: u64,
    pub apply_to: Vec<NoiseTarget>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { flip_fraction: 0.1, seed: 0, apply_to: vec![NoiseTarget::Train, NoiseTarget::Validation] }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..=0.5).contains(&self.flip_fraction) {
            return Err(EvalError::InvalidSpec(format!(
                "flip_fraction must lie in [0, 0.5], got {}",
                self.flip_fraction
            )));
        }
        Ok(())
    }

    pub fn targets(&self, target: NoiseTarget) -> bool {
        self.apply_to.contains(&target)
    }
}

/// Positions whose label a swap with `flip_fraction` and `seed` toggles,
/// ascending. Each class contributes `floor(flip_fraction * n)` positions,
/// where `n` is the size of the smaller class, so the swap moves as many
/// samples in each direction and class balance is preserved.
pub fn flip_indices(labels: &[Label], flip_fraction: f64, seed: u64) -> Vec<usize> {
    let malicious: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Malicious).collect();
    let benign: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Benign).collect();
    let smaller = malicious.len().min(benign.len());
    let k = (flip_fraction * smaller as f64 + 1e-9).floor() as usize;
    let mut rng = crate::seed::rng(seed);
    let mut chosen = Vec::with_capacity(2 * k);
    for mut members in [malicious, benign] {
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..k]);
    }
    chosen.sort_unstable();
    chosen
}

/// A dataset whose labels may have been swapped, with the original labels
/// kept for audit and for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset {
    data: Dataset,
    clean: Vec<Label>,
}

impl NoisyDataset {
    pub fn new(data: Dataset) -> Result<Self, EvalError> {
        let clean = data.labels().ok_or(EvalError::Unlabeled)?;
        Ok(NoisyDataset { data, clean })
    }

    /// Toggles the labels chosen by `flip_indices` on the clean labels.
    /// The choice does not depend on the current labels, so applying the
    /// same fraction and seed twice restores the original labels.
    pub fn apply(&mut self, flip_fraction: f64, seed: u64) -> Result<(), EvalError> {
        NoiseSpec { flip_fraction, seed, apply_to: Vec::new() }.validate()?;
        for i in flip_indices(&self.clean, flip_fraction, seed) {
            let current = self.data.get(i).and_then(|x| x.label()).ok_or(EvalError::Unlabeled)?;
            self.data.set_label(i, Some(current.flipped()));
        }
        Ok(())
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn clean_labels(&self) -> &[Label] {
        &self.clean
    }

    /// Positions whose current label differs from the clean one.
    pub fn flipped(&self) -> Vec<usize> {
        self.data
            .iter()
            .zip(&self.clean)
            .enumerate()
            .filter(|(_, (x, &c))| x.label() != Some(c))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn into_parts(self) -> (Dataset, Vec<Label>) {
        (self.data, self.clean)
    }
}

/// Swaps labels across the whole of `data` with `spec`'s fraction and seed.
/// `apply_to` is ignored here; it tells experiment code which splits to
/// pass in.
pub fn inject_label_noise(data: &Dataset, spec: &NoiseSpec) -> Result<NoisyDataset, EvalError> {
    let mut noisy = NoisyDataset::new(data.clone())?;
    noisy.apply(spec.flip_fraction, spec.seed)?;
    Ok(noisy)
}
