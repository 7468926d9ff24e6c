use super::{Classifier, LearnerError, LearnerKind, LearnerSpec};
use crate::vectorize::{Dataset, FeatureVector};

/// A trained component classifier.
///
/// Parameters live in one flat array:
/// - linear: `[w_0 .. w_{d-1}, b]`
/// - mlp with `h` hidden units: `[W1 (d*h, input-major), b1 (h), w2 (h), b2]`
///
/// The hidden layer uses `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLearner {
    spec: LearnerSpec,
    dimension: usize,
    params: Vec<f64>,
}

pub(crate) fn param_count(kind: LearnerKind, dimension: usize, hidden: usize) -> usize {
    match kind {
        LearnerKind::Linear => dimension + 1,
        LearnerKind::Mlp => dimension * hidden + 2 * hidden + 1,
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl TrainedLearner {
    pub fn from_parameters(spec: LearnerSpec, dimension: usize, params: Vec<f64>) -> Result<Self, LearnerError> {
        spec.validate()?;
        if dimension == 0 {
            return Err(LearnerError::InvalidSpec("dimension must be positive".into()));
        }
        let expected = param_count(spec.kind, dimension, spec.hidden_units);
        if params.len() != expected {
            return Err(LearnerError::InvalidSpec(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(LearnerError::InvalidSpec("parameters must be finite".into()));
        }
        Ok(TrainedLearner { spec, dimension, params })
    }

    pub(crate) fn new_unchecked(spec: LearnerSpec, dimension: usize, params: Vec<f64>) -> Self {
        TrainedLearner { spec, dimension, params }
    }

    pub fn kind(&self) -> LearnerKind {
        self.spec.kind
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn hidden(&self) -> usize {
        self.spec.hidden_units
    }

    /// Whether parameter `i` is a weight (L2-penalized) rather than a bias.
    pub(crate) fn is_weight(&self, i: usize) -> bool {
        let d = self.dimension;
        match self.spec.kind {
            LearnerKind::Linear => i < d,
            LearnerKind::Mlp => {
                let h = self.hidden();
                i < d * h || (d * h + h..d * h + 2 * h).contains(&i)
            }
        }
    }

    fn hidden_activations(&self, x: &FeatureVector) -> Vec<f64> {
        let h = self.hidden();
        let d = self.dimension;
        let mut pre = self.params[d * h..d * h + h].to_vec();
        for &i in x.active() {
            let row = &self.params[i as usize * h..(i as usize + 1) * h];
            for (a, w) in pre.iter_mut().zip(row) {
                *a += w;
            }
        }
        pre.iter_mut().for_each(|a| *a = a.tanh());
        pre
    }

    /// Margin without the dimension check.
    pub(crate) fn margin_unchecked(&self, x: &FeatureVector) -> f64 {
        let d = self.dimension;
        match self.spec.kind {
            LearnerKind::Linear => self.params[d] + x.active().iter().map(|&i| self.params[i as usize]).sum::<f64>(),
            LearnerKind::Mlp => {
                let h = self.hidden();
                let hidden = self.hidden_activations(x);
                let w2 = &self.params[d * h + h..d * h + 2 * h];
                self.params[d * h + 2 * h] + hidden.iter().zip(w2).map(|(a, w)| a * w).sum::<f64>()
            }
        }
    }

    /// Adds `scale * d(margin)/d(params)` into `grad`.
    pub(crate) fn accumulate_margin_gradient(&self, x: &FeatureVector, scale: f64, grad: &mut [f64]) {
        let d = self.dimension;
        match self.spec.kind {
            LearnerKind::Linear => {
                for &i in x.active() {
                    grad[i as usize] += scale;
                }
                grad[d] += scale;
            }
            LearnerKind::Mlp => {
                let h = self.hidden();
                let hidden = self.hidden_activations(x);
                let w2_start = d * h + h;
                let mut delta = vec![0.0; h];
                for j in 0..h {
                    grad[w2_start + j] += scale * hidden[j];
                    delta[j] = scale * self.params[w2_start + j] * (1.0 - hidden[j] * hidden[j]);
                    grad[d * h + j] += delta[j];
                }
                grad[d * h + 2 * h] += scale;
                for &i in x.active() {
                    let row = &mut grad[i as usize * h..(i as usize + 1) * h];
                    for (g, dj) in row.iter_mut().zip(&delta) {
                        *g += dj;
                    }
                }
            }
        }
    }

    /// Mean logistic loss over `indices` plus `l2 / 2 * |weights|^2`.
    pub(crate) fn objective_on(&self, data: &Dataset, indices: &[usize], l2: f64) -> f64 {
        let loss: f64 = indices
            .iter()
            .map(|&k| {
                let x = &data.vectors()[k];
                let y = x.label().expect("labeled").sign() as f64;
                softplus(-y * self.margin_unchecked(x))
            })
            .sum();
        loss / indices.len() as f64 + 0.5 * l2 * self.weight_norm_sq()
    }

    fn weight_norm_sq(&self) -> f64 {
        self.params
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.is_weight(i))
            .map(|(_, p)| p * p)
            .sum()
    }

    /// Gradient of [`Self::objective_on`], written into `grad`.
    pub(crate) fn gradient_on(&self, data: &Dataset, indices: &[usize], l2: f64, grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let inv = 1.0 / indices.len() as f64;
        for &k in indices {
            let x = &data.vectors()[k];
            let y = x.label().expect("labeled").sign() as f64;
            // d/dm softplus(-y m) = -y * sigmoid(-y m)
            let dloss = -y * sigmoid(-y * self.margin_unchecked(x));
            self.accumulate_margin_gradient(x, dloss * inv, grad);
        }
        if l2 > 0.0 {
            for (i, g) in grad.iter_mut().enumerate() {
                if self.is_weight(i) {
                    *g += l2 * self.params[i];
                }
            }
        }
    }

    /// Training objective over the whole dataset. Requires labels.
    pub fn objective(&self, data: &Dataset, l2: f64) -> Result<f64, LearnerError> {
        self.check_dataset(data)?;
        let all: Vec<usize> = (0..data.len()).collect();
        Ok(self.objective_on(data, &all, l2))
    }

    /// Analytic gradient of [`Self::objective`] with respect to the flat
    /// parameter array.
    pub fn gradient(&self, data: &Dataset, l2: f64) -> Result<Vec<f64>, LearnerError> {
        self.check_dataset(data)?;
        let all: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        self.gradient_on(data, &all, l2, &mut grad);
        Ok(grad)
    }

    /// Same learner with different parameter values.
    pub fn with_parameters(&self, params: Vec<f64>) -> Result<Self, LearnerError> {
        TrainedLearner::from_parameters(self.spec, self.dimension, params)
    }

    fn check_dataset(&self, data: &Dataset) -> Result<(), LearnerError> {
        if data.dimension() != self.dimension {
            return Err(LearnerError::DimensionMismatch { expected: self.dimension, found: data.dimension() });
        }
        if data.is_empty() {
            return Err(LearnerError::EmptyDataset);
        }
        if data.iter().any(|x| x.label().is_none()) {
            return Err(LearnerError::Unlabeled);
        }
        Ok(())
    }
}

impl Classifier for TrainedLearner {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn decision_margin(&self, x: &FeatureVector) -> Result<f64, LearnerError> {
        if x.dimension() != self.dimension {
            return Err(LearnerError::DimensionMismatch { expected: self.dimension, found: x.dimension() });
        }
        Ok(self.margin_unchecked(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Label;
    use rand::Rng;

    fn linear(params: Vec<f64>) -> TrainedLearner {
        let d = params.len() - 1;
        TrainedLearner::from_parameters(LearnerSpec::default(), d, params).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_margin_and_positive_label() {
        let m = linear(vec![0.0; 6]);
        let mut rng = crate::seed::rng(1);
        for _ in 0..100 {
            let active: Vec<u32> = (0..5).filter(|_| rng.gen_bool(0.5)).collect();
            let x = FeatureVector::new(5, active, None).unwrap();
            assert_eq!(m.decision_margin(&x).unwrap(), 0.0);
            assert_eq!(m.predict_label(&x).unwrap(), Label::Malicious);
        }
    }

    #[test]
    fn unit_weight_on_active_feature() {
        let m = linear(vec![1.0, 0.0, 0.0]);
        let x = FeatureVector::new(2, vec![0], None).unwrap();
        assert_eq!(m.predict_label(&x).unwrap(), Label::Malicious);
    }

    #[test]
    fn margin_sign_matches_label() {
        let mut rng = crate::seed::rng(2);
        let params: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = linear(params);
        for _ in 0..100 {
            let active: Vec<u32> = (0..8).filter(|_| rng.gen_bool(0.5)).collect();
            let x = FeatureVector::new(8, active, None).unwrap();
            let margin = m.decision_margin(&x).unwrap();
            assert_eq!(m.predict_label(&x).unwrap(), Label::from_margin(margin));
        }
    }

    #[test]
    fn margin_monotone_in_active_weight() {
        let x = FeatureVector::new(3, vec![1], None).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for step in -5..=5 {
            let m = linear(vec![0.3, step as f64 * 0.1, -0.2, 0.05]);
            let margin = m.decision_margin(&x).unwrap();
            assert!(margin > prev);
            prev = margin;
        }
        // An inactive weight leaves the margin unchanged.
        let a = linear(vec![0.3, 0.1, -0.2, 0.05]).decision_margin(&x).unwrap();
        let b = linear(vec![9.0, 0.1, -0.2, 0.05]).decision_margin(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch() {
        let m = linear(vec![0.0; 4]);
        let x = FeatureVector::new(4, vec![], None).unwrap();
        assert!(matches!(m.decision_margin(&x), Err(LearnerError::DimensionMismatch { expected: 3, found: 4 })));
        assert!(m.predict_label(&x).is_err());
    }

    #[test]
    fn parameter_validation() {
        let spec = LearnerSpec::default();
        assert!(TrainedLearner::from_parameters(spec, 2, vec![0.0; 2]).is_err());
        assert!(TrainedLearner::from_parameters(spec, 2, vec![0.0, f64::NAN, 0.0]).is_err());
        let mlp = LearnerSpec { kind: LearnerKind::Mlp, hidden_units: 3, ..spec };
        assert!(TrainedLearner::from_parameters(mlp, 2, vec![0.0; 2 * 3 + 7]).is_ok());
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
