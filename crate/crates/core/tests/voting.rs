use proptest::prelude::*;

use droidsel::ensemble::{vote, EnsemblePool, WeightVector};
use droidsel::ga::{diversity, fitness, PredictionMatrix};
use droidsel::learner::{Classifier, LearnerSpec, TrainedLearner};
use droidsel::vectorize::FeatureVector;
use droidsel::Label;

/// Pool whose learner `i` predicts `rows[i][k]` on the one-hot sample `k`.
fn pool(rows: &[Vec<i8>]) -> EnsemblePool {
    let m = rows[0].len();
    let learners = rows
        .iter()
        .map(|row| {
            let mut params: Vec<f64> = row.iter().map(|&v| v as f64).collect();
            params.push(0.0);
            TrainedLearner::from_parameters(LearnerSpec::default(), m, params).unwrap()
        })
        .collect();
    EnsemblePool::new(learners, vec![0; rows.len()], 0).unwrap()
}

fn sample(m: usize, k: usize) -> FeatureVector {
    FeatureVector::new(m, vec![k as u32], None).unwrap()
}

fn matrix(rows: &[Vec<i8>]) -> PredictionMatrix {
    PredictionMatrix::from_rows(rows).unwrap()
}

fn sign(v: bool) -> i8 {
    if v {
        1
    } else {
        -1
    }
}

/// `n` rows of `m` predictions plus a nonzero selection mask.
fn instance(max_n: usize, max_m: usize) -> impl Strategy<Value = (Vec<Vec<i8>>, u64)> {
    (1..=max_n, 1..=max_m).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(any::<bool>().prop_map(sign), m), n),
            1u64..(1 << n),
        )
    })
}

fn omega(n: usize, mask: u64) -> WeightVector {
    WeightVector::from_mask(n, mask)
}

proptest! {
    #[test]
    fn vote_is_signed_sum((rows, mask) in instance(8, 12)) {
        let (n, m) = (rows.len(), rows[0].len());
        let p = pool(&rows);
        for k in 0..m {
            let sum: i32 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rows[i][k] as i32).sum();
            let expected = if sum >= 0 { Label::Malicious } else { Label::Benign };
            prop_assert_eq!(vote(&p, &omega(n, mask), &sample(m, k)).unwrap(), expected);
        }
    }

    #[test]
    fn single_bit_is_that_learner((rows, pick) in instance(8, 12).prop_flat_map(|(rows, _)| {
        let n = rows.len();
        (Just(rows), 0..n)
    })) {
        let (n, m) = (rows.len(), rows[0].len());
        let p = pool(&rows);
        let w = WeightVector::single(n, pick);
        for k in 0..m {
            let x = sample(m, k);
            prop_assert_eq!(vote(&p, &w, &x).unwrap(), p.learners()[pick].predict_label(&x).unwrap());
        }
    }

    #[test]
    fn deselected_learners_are_inert((rows, mask) in instance(8, 12), flip_seed: u64) {
        let (n, m) = (rows.len(), rows[0].len());
        let mut changed = rows.clone();
        for (i, row) in changed.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                for (k, v) in row.iter_mut().enumerate() {
                    if (flip_seed >> ((i * 7 + k) % 64)) & 1 == 1 {
                        *v = -*v;
                    }
                }
            }
        }
        let w = omega(n, mask);
        let (a, b) = (pool(&rows), pool(&changed));
        for k in 0..m {
            prop_assert_eq!(vote(&a, &w, &sample(m, k)).unwrap(), vote(&b, &w, &sample(m, k)).unwrap());
        }
        prop_assert_eq!(diversity(&matrix(&rows), &w).unwrap(), diversity(&matrix(&changed), &w).unwrap());
        let labels: Vec<Label> = (0..m).map(|k| if k % 2 == 0 { Label::Malicious } else { Label::Benign }).collect();
        prop_assert_eq!(fitness(&matrix(&rows), &labels, &w).unwrap(), fitness(&matrix(&changed), &labels, &w).unwrap());
    }

    #[test]
    fn duplicating_a_selected_learner_keeps_strict_majorities((rows, mask) in instance(7, 12), pick: usize) {
        let (n, m) = (rows.len(), rows[0].len());
        let selected: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let dup = selected[pick % selected.len()];
        let mut extended = rows.clone();
        extended.push(rows[dup].clone());
        let w = omega(n + 1, mask | 1 << n);
        let before = pool(&rows);
        let after = pool(&extended);
        for k in 0..m {
            let sum: i32 = selected.iter().map(|&i| rows[i][k] as i32).sum();
            let original = vote(&before, &omega(n, mask), &sample(m, k)).unwrap();
            let duplicated = vote(&after, &w, &sample(m, k)).unwrap();
            // A margin of one against the duplicate becomes a tie, which
            // votes +1; every other strict majority survives.
            if sum.abs() >= 2 || sum.signum() == rows[dup][k] as i32 {
                prop_assert_eq!(duplicated, original);
            } else if sum != 0 {
                prop_assert_eq!(duplicated, Label::Malicious);
            }
        }
    }

    #[test]
    fn diversity_is_permutation_symmetric_and_bounded((rows, mask) in instance(8, 20), shift in 0usize..8) {
        let (n, m) = (rows.len(), rows[0].len());
        let d = diversity(&matrix(&rows), &omega(n, mask)).unwrap();
        // Rotate learners, carrying the selection with them.
        let s = shift % n;
        let rotated: Vec<Vec<i8>> = (0..n).map(|i| rows[(i + s) % n].clone()).collect();
        let rotated_mask = (0..n).filter(|&i| mask >> ((i + s) % n) & 1 == 1).fold(0u64, |acc, i| acc | 1 << i);
        let d2 = diversity(&matrix(&rotated), &omega(n, rotated_mask)).unwrap();
        prop_assert!((d - d2).abs() <= 1e-12);

        let n_sel = mask.count_ones() as f64;
        prop_assert!(d >= 0.0);
        prop_assert!(d <= (n_sel - 1.0) / 2.0 * 2.0 * (m as f64).sqrt() + 1e-12);
    }

    #[test]
    fn fitness_zero_cases((rows, mask) in instance(8, 12)) {
        let (n, m) = (rows.len(), rows[0].len());
        let w = omega(n, mask);
        let mx = matrix(&rows);
        let votes = mx.votes(&w).unwrap();
        // Labels opposite to every vote give accuracy 0.
        let wrong: Vec<Label> = votes.iter().map(|l| l.flipped()).collect();
        prop_assert_eq!(fitness(&mx, &wrong, &w).unwrap(), 0.0);
        let single = WeightVector::single(n, mask.trailing_zeros() as usize);
        prop_assert_eq!(fitness(&mx, &votes, &single).unwrap(), 0.0);
        let f = fitness(&mx, &votes, &w).unwrap();
        let some_disagreement = (0..m).any(|k| {
            let mut vals = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rows[i][k]);
            let first = vals.next().unwrap();
            vals.any(|v| v != first)
        });
        prop_assert_eq!(f > 0.0, some_disagreement);
    }
}

#[test]
fn duplicating_a_minority_learner_can_tie_a_margin_of_one() {
    let rows = vec![vec![1], vec![-1], vec![-1]];
    let m = 1;
    assert_eq!(vote(&pool(&rows), &omega(3, 0b111), &sample(m, 0)).unwrap(), Label::Benign);
    let mut extended = rows.clone();
    extended.push(vec![1]);
    assert_eq!(vote(&pool(&extended), &omega(4, 0b1111), &sample(m, 0)).unwrap(), Label::Malicious);
}
