use std::sync::Arc;

use limited_supply::policies::{depletion_forecast, partition_by_depletion};
use limited_supply::reward::Provenance;
use limited_supply::{InventoryState, Policy, RewardEstimate, SupplyPartition, UserPopulation};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
struct Setting {
    q: Array2<f64>,
    weights: Vec<f64>,
    stock: Vec<u32>,
}

fn setting() -> impl Strategy<Value = Setting> {
    (1usize..6, 1usize..8).prop_flat_map(|(users, actions)| {
        (
            prop::collection::vec(-10.0f64..10.0, users * actions),
            prop::collection::vec(0.05f64..1.0, users),
            prop::collection::vec(0u32..3, actions),
            0..actions,
        )
            .prop_map(move |(q, w, mut stock, keep)| {
                let total: f64 = w.iter().sum();
                stock[keep] = stock[keep].max(1);
                Setting {
                    q: Array2::from_shape_vec((users, actions), q).unwrap(),
                    weights: w.iter().map(|x| x / total).collect(),
                    stock,
                }
            })
    })
}

impl Setting {
    fn population(&self) -> UserPopulation {
        UserPopulation::new(Array2::zeros((self.weights.len(), 0)), self.weights.clone()).unwrap()
    }

    fn estimate(&self, q: Array2<f64>) -> Arc<RewardEstimate> {
        Arc::new(RewardEstimate::new(q, Provenance::Exact).unwrap())
    }
}

fn relative_score(p: &Policy, user: usize, a: usize) -> f64 {
    p.estimate().q_hat()[[user, a]] - p.population_means()[a]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn opls_ignores_user_independent_offsets(s in setting(), offsets in prop::collection::vec(-50.0f64..50.0, 8)) {
        let pop = s.population();
        let shifted = Array2::from_shape_fn(s.q.dim(), |(j, a)| s.q[[j, a]] + offsets[a]);
        let base = Policy::opls(s.estimate(s.q.clone()), &pop, 1.0).unwrap();
        let moved = Policy::opls(s.estimate(shifted), &pop, 1.0).unwrap();
        let stock = InventoryState::new(s.stock.clone());
        for user in 0..pop.len() {
            let a = base.opls_select(user, &stock, 1.0).unwrap();
            let b = moved.opls_select(user, &stock, 1.0).unwrap();
            // distinct picks are only allowed between equal scores
            prop_assert!(a == b || (relative_score(&base, user, a) - relative_score(&base, user, b)).abs() < 1e-9);
        }
    }

    #[test]
    fn every_rule_picks_an_available_action(s in setting(), sold in prop::collection::vec(any::<bool>(), 8), beta in 0.0f64..=1.0) {
        let pop = s.population();
        let est = s.estimate(s.q.clone());
        let k = s.stock.len();
        let stock = InventoryState::new(s.stock.clone());
        let rules = [
            Policy::greedy(est.clone(), &pop).unwrap(),
            Policy::opls(est.clone(), &pop, beta).unwrap(),
            Policy::opls_mixed(est.clone(), &pop, beta, SupplyPartition::from_sold_flags(sold[..k].to_vec())).unwrap(),
            Policy::softmax_logging(est, &pop, 3.0).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for user in 0..pop.len() {
            for r in &rules {
                prop_assert!(stock.is_available(r.select(user, &stock, &mut rng).unwrap()));
            }
        }
    }

    #[test]
    fn mixed_with_nothing_sold_decides_like_greedy(s in setting(), beta in 0.0f64..=1.0) {
        let pop = s.population();
        let est = s.estimate(s.q.clone());
        let greedy = Policy::greedy(est.clone(), &pop).unwrap();
        let mixed = Policy::opls_mixed(est, &pop, beta, SupplyPartition::all_unsold(s.stock.len())).unwrap();
        let stock = InventoryState::new(s.stock.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for user in 0..pop.len() {
            prop_assert_eq!(mixed.select(user, &stock, &mut rng).unwrap(), greedy.greedy_select(user, &stock).unwrap());
        }
    }

    #[test]
    fn mixed_with_everything_sold_decides_like_opls(s in setting(), beta in 0.0f64..=1.0) {
        let pop = s.population();
        let est = s.estimate(s.q.clone());
        let opls = Policy::opls(est.clone(), &pop, beta).unwrap();
        let mixed = Policy::opls_mixed(est, &pop, beta, SupplyPartition::all_sold(s.stock.len())).unwrap();
        let stock = InventoryState::new(s.stock.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for user in 0..pop.len() {
            prop_assert_eq!(mixed.select(user, &stock, &mut rng).unwrap(), opls.select(user, &stock, &mut rng).unwrap());
        }
    }

    #[test]
    fn softmax_is_a_distribution_over_available_actions(s in setting(), beta in -100.0f64..100.0) {
        let pop = s.population();
        let p = Policy::softmax_logging(s.estimate(s.q.clone()), &pop, beta).unwrap();
        let stock = InventoryState::new(s.stock.clone());
        for user in 0..pop.len() {
            let probs = p.softmax_probabilities(user, &stock, beta).unwrap();
            prop_assert_eq!(probs.iter().map(|&(a, _)| a).collect::<Vec<_>>(), stock.available_actions());
            prop_assert!((probs.iter().map(|&(_, x)| x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn population_means_follow_the_weights(s in setting()) {
        let pop = s.population();
        let p = Policy::greedy(s.estimate(s.q.clone()), &pop).unwrap();
        for (a, m) in p.population_means().iter().enumerate() {
            let direct: f64 = (0..pop.len()).map(|j| s.weights[j] * s.q[[j, a]]).sum();
            prop_assert!((m - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn greedy_is_not_shift_invariant() {
    let pop = UserPopulation::anonymous(2).unwrap();
    let q = array![[3.0, 2.0], [1.0, 0.0]];
    let est = |q: Array2<f64>| Arc::new(RewardEstimate::new(q, Provenance::Exact).unwrap());
    let stock = InventoryState::new(vec![1, 1]);
    let before = Policy::greedy(est(q.clone()), &pop).unwrap();
    let after = Policy::greedy(est(&q + &array![[0.0, 5.0], [0.0, 5.0]]), &pop).unwrap();
    assert_eq!(before.greedy_select(0, &stock).unwrap(), 0);
    assert_eq!(after.greedy_select(0, &stock).unwrap(), 1);
    let opls_before = Policy::opls(est(q.clone()), &pop, 1.0).unwrap();
    let opls_after = Policy::opls(est(&q + &array![[0.0, 5.0], [0.0, 5.0]]), &pop, 1.0).unwrap();
    assert_eq!(opls_before.opls_select(0, &stock, 1.0).unwrap(), opls_after.opls_select(0, &stock, 1.0).unwrap());
}

#[test]
fn forecast_partition_splits_scarce_and_plentiful_stock() {
    let q_c = array![[1.0, 0.5, 0.0], [1.0, 0.5, 0.0]];
    let stock = InventoryState::new(vec![3, 3, 3]);
    let forecast = depletion_forecast(&stock, 9, &q_c, &[0.5, 0.5]).unwrap();
    assert_eq!(forecast, vec![0.0, 1.5, 3.0]);
    let partition = partition_by_depletion(&stock, 9, &q_c, &[0.5, 0.5]).unwrap();
    assert_eq!(partition.sold(), vec![0]);
    assert_eq!(partition.unsold(), vec![1, 2]);
}
