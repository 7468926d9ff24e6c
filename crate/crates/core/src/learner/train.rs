use rand::seq::SliceRandom;
use rand::Rng;

use super::model::{param_count, TrainedLearner};
use super::{LearnerError, LearnerKind, LearnerSpec};
use crate::vectorize::Dataset;
use crate::Label;

fn check_training_data(data: &Dataset) -> Result<(), LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyDataset);
    }
    let labels = data.labels().ok_or(LearnerError::Unlabeled)?;
    let positives = labels.iter().filter(|&&l| l == Label::Malicious).count();
    if positives == 0 || positives == labels.len() {
        return Err(LearnerError::SingleClassData);
    }
    Ok(())
}

fn initial_parameters(spec: &LearnerSpec, dimension: usize) -> Vec<f64> {
    let mut params = vec![0.0; param_count(spec.kind, dimension, spec.hidden_units)];
    if spec.kind == LearnerKind::Mlp {
        // Separate stream from the batch shuffling.
        let mut rng = crate::seed::rng(crate::seed::derive_tagged(spec.seed, "init", 0));
        let h = spec.hidden_units;
        let input_bound = 1.0 / (dimension as f64).sqrt();
        let output_bound = 1.0 / (h as f64).sqrt();
        for w in &mut params[..dimension * h] {
            *w = rng.gen_range(-input_bound..input_bound);
        }
        for w in &mut params[dimension * h + h..dimension * h + 2 * h] {
            *w = rng.gen_range(-output_bound..output_bound);
        }
    }
    params
}

/// Trains a learner and returns it with the full-data objective recorded
/// after every epoch.
pub fn train_with_history(spec: &LearnerSpec, data: &Dataset) -> Result<(TrainedLearner, Vec<f64>), LearnerError> {
    spec.validate()?;
    check_training_data(data)?;
    let dimension = data.dimension();
    let mut model = TrainedLearner::new_unchecked(*spec, dimension, initial_parameters(spec, dimension));

    let mut rng = crate::seed::rng(spec.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let all = order.clone();
    let mut grad = vec![0.0; model.parameters().len()];
    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 1..=spec.epochs {
        if spec.batch_size < data.len() {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(spec.batch_size) {
            model.gradient_on(data, batch, spec.l2, &mut grad);
            for (p, g) in model.parameters_mut().iter_mut().zip(&grad) {
                *p -= spec.learning_rate * g;
            }
        }
        let objective = model.objective_on(data, &all, spec.l2);
        if !objective.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(LearnerError::NonFiniteLoss { epoch });
        }
        history.push(objective);
    }
    Ok((model, history))
}

pub fn train(spec: &LearnerSpec, data: &Dataset) -> Result<TrainedLearner, LearnerError> {
    train_with_history(spec, data).map(|(model, _)| model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{accuracy, Classifier};
    use crate::vectorize::FeatureVector;

    fn vector(d: usize, active: &[u32], label: Label) -> FeatureVector {
        FeatureVector::new(d, active.to_vec(), Some(label)).unwrap()
    }

    /// x = +1 encoded as feature 0 set, x = -1 as feature 1 set.
    fn separable() -> Dataset {
        let mut v = Vec::new();
        for _ in 0..100 {
            v.push(vector(2, &[0], Label::Malicious));
            v.push(vector(2, &[1], Label::Benign));
        }
        Dataset::new(2, v).unwrap()
    }

    fn xor() -> Dataset {
        let mut v = Vec::new();
        for _ in 0..25 {
            v.push(vector(2, &[], Label::Benign));
            v.push(vector(2, &[0, 1], Label::Benign));
            v.push(vector(2, &[0], Label::Malicious));
            v.push(vector(2, &[1], Label::Malicious));
        }
        Dataset::new(2, v).unwrap()
    }

    #[test]
    fn linear_separates() {
        let data = separable();
        let model = train(&LearnerSpec::default(), &data).unwrap();
        assert_eq!(accuracy(&model, &data).unwrap(), 1.0);
        let held_out = FeatureVector::new(2, vec![0], None).unwrap();
        assert_eq!(model.predict_label(&held_out).unwrap(), Label::Malicious);
    }

    #[test]
    fn mlp_learns_xor() {
        let data = xor();
        let spec = LearnerSpec {
            kind: LearnerKind::Mlp,
            hidden_units: 8,
            learning_rate: 0.1,
            epochs: 300,
            l2: 0.0,
            seed: 11,
            ..LearnerSpec::default()
        };
        let model = train(&spec, &data).unwrap();
        assert!(accuracy(&model, &data).unwrap() >= 0.95);
        let linear = train(&LearnerSpec { epochs: 300, ..LearnerSpec::default() }, &data).unwrap();
        assert!(accuracy(&linear, &data).unwrap() <= 0.75);
    }

    #[test]
    fn single_class_rejected() {
        let data = Dataset::new(2, vec![vector(2, &[0], Label::Malicious); 5]).unwrap();
        assert!(matches!(train(&LearnerSpec::default(), &data), Err(LearnerError::SingleClassData)));
        let empty = Dataset::new(2, vec![]).unwrap();
        assert!(matches!(train(&LearnerSpec::default(), &empty), Err(LearnerError::EmptyDataset)));
        let unlabeled = Dataset::new(2, vec![FeatureVector::new(2, vec![], None).unwrap()]).unwrap();
        assert!(matches!(train(&LearnerSpec::default(), &unlabeled), Err(LearnerError::Unlabeled)));
    }

    #[test]
    fn divergence_is_reported() {
        let spec = LearnerSpec { learning_rate: 1e300, l2: 1.0, batch_size: 1000, ..LearnerSpec::default() };
        assert!(matches!(train(&spec, &separable()), Err(LearnerError::NonFiniteLoss { .. })));
    }

    #[test]
    fn deterministic() {
        let spec = LearnerSpec { kind: LearnerKind::Mlp, hidden_units: 4, seed: 5, ..LearnerSpec::default() };
        let a = train(&spec, &xor()).unwrap();
        let b = train(&spec, &xor()).unwrap();
        assert_eq!(
            a.parameters().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            b.parameters().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
        let c = train(&LearnerSpec { seed: 6, ..spec }, &xor()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let mut rng = crate::seed::rng(3);
        let mut v = Vec::new();
        for _ in 0..60 {
            let active: Vec<u32> = (0..6).filter(|_| rng.gen_bool(0.5)).collect();
            let label = if active.contains(&0) ^ rng.gen_bool(0.2) { Label::Malicious } else { Label::Benign };
            v.push(vector(6, &active, label));
        }
        let data = Dataset::new(6, v).unwrap();
        let spec = LearnerSpec { batch_size: data.len(), epochs: 100, learning_rate: 0.5, ..LearnerSpec::default() };
        let (_, history) = train_with_history(&spec, &data).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }
}
