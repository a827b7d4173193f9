use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::UserPopulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRewardKind {
    /// Sigmoid of an affine score, in `(0, 1)`; used for consumption.
    Logistic,
    /// Affine score shifted so the smallest entry is zero; used for reward.
    Linear,
}

/// Context-dependent component `f(x, a)`.
///
/// Each action draws a coefficient vector and an intercept from a standard
/// normal; the score `(x . theta_a + b_a) / sqrt(d + 1)` has unit variance
/// for standard normal contexts.
pub fn synth_feature_reward<R: Rng + ?Sized>(
    population: &UserPopulation,
    actions: usize,
    rng: &mut R,
    kind: FeatureRewardKind,
) -> Array2<f64> {
    let features = population.features();
    let dim = features.ncols();
    let scale = ((dim + 1) as f64).sqrt().recip();
    let mut scores = Array2::zeros((features.nrows(), actions));
    for a in 0..actions {
        let theta: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let intercept: f64 = rng.sample(StandardNormal);
        for (j, row) in features.rows().into_iter().enumerate() {
            let dot: f64 = row.iter().zip(&theta).map(|(x, t)| x * t).sum();
            scores[[j, a]] = (dot + intercept) * scale;
        }
    }
    match kind {
        FeatureRewardKind::Logistic => scores.mapv(|s| 1.0 / (1.0 + (-s).exp())),
        FeatureRewardKind::Linear => {
            let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
            scores.mapv(|s| s - min)
        }
    }
}

/// Shared-preference component `g(x, a)`: iid `Uniform(0, max_f)` draws,
/// each row sorted in descending order.
pub fn sorted_baseline_g<R: Rng + ?Sized>(rng: &mut R, users: usize, actions: usize, max_f: f64) -> Array2<f64> {
    let mut g = Array2::zeros((users, actions));
    if max_f <= 0.0 {
        return g;
    }
    for mut row in g.rows_mut() {
        let mut draws: Vec<f64> = (0..actions).map(|_| rng.random::<f64>() * max_f).collect();
        draws.sort_by(|a, b| b.total_cmp(a));
        for (slot, v) in row.iter_mut().zip(draws) {
            *slot = v;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn population(users: usize, dim: usize, seed: u64) -> UserPopulation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats = Array2::from_shape_fn((users, dim), |_| rng.sample(StandardNormal));
        UserPopulation::uniform(feats).unwrap()
    }

    #[test]
    fn baseline_rows_are_sorted_and_bounded() {
        let g = sorted_baseline_g(&mut ChaCha8Rng::seed_from_u64(1), 20, 15, 2.5);
        for row in g.rows() {
            for k in 1..row.len() {
                assert!(row[k - 1] >= row[k]);
            }
            assert!(row.iter().all(|v| (0.0..=2.5).contains(v)));
        }
    }

    #[test]
    fn baseline_degenerate_range_is_zero() {
        let g = sorted_baseline_g(&mut ChaCha8Rng::seed_from_u64(1), 3, 4, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn baseline_marginal_is_uniform_by_ks() {
        let max_f = 3.0;
        let g = sorted_baseline_g(&mut ChaCha8Rng::seed_from_u64(5), 1000, 100, max_f);
        let mut draws: Vec<f64> = g.iter().copied().collect();
        draws.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        let d = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = x / max_f;
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn logistic_in_unit_interval_and_deterministic() {
        let pop = population(30, 10, 2);
        let a = synth_feature_reward(&pop, 8, &mut ChaCha8Rng::seed_from_u64(9), FeatureRewardKind::Logistic);
        let b = synth_feature_reward(&pop, 8, &mut ChaCha8Rng::seed_from_u64(9), FeatureRewardKind::Logistic);
        assert_eq!(a, b);
        assert!(a.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn linear_is_nonnegative() {
        let pop = population(30, 10, 2);
        let f = synth_feature_reward(&pop, 8, &mut ChaCha8Rng::seed_from_u64(4), FeatureRewardKind::Linear);
        assert!(f.iter().all(|&v| v >= 0.0));
        assert!(f.iter().any(|&v| v == 0.0));
    }

    #[test]
    fn identical_contexts_give_identical_rows() {
        let mut feats = Array2::zeros((3, 4));
        feats.row_mut(0).assign(&ndarray::array![0.3, -1.0, 2.0, 0.1]);
        feats.row_mut(2).assign(&ndarray::array![0.3, -1.0, 2.0, 0.1]);
        let pop = UserPopulation::uniform(feats).unwrap();
        for kind in [FeatureRewardKind::Logistic, FeatureRewardKind::Linear] {
            let f = synth_feature_reward(&pop, 5, &mut ChaCha8Rng::seed_from_u64(1), kind);
            assert_eq!(f.row(0), f.row(2));
        }
    }
}
