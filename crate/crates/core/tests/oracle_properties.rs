use itertools::Itertools;
use limited_supply::oracle::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn square(n: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |v| Array2::from_shape_vec((n, n), v).unwrap())
}

fn any_square() -> impl Strategy<Value = Array2<f64>> {
    (1usize..=6).prop_flat_map(square)
}

fn row_sorted(mut q: Array2<f64>) -> Array2<f64> {
    for mut row in q.rows_mut() {
        let mut v = row.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        row.assign(&Array1::from(v));
    }
    q
}

fn brute_force_max(q: &Array2<f64>) -> f64 {
    let n = q.nrows();
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(i, &j)| q[[i, j]]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn assignment_matches_brute_force(q in any_square()) {
        let a = max_weight_assignment(&q);
        prop_assert!((a.value - brute_force_max(&q)).abs() < 1e-9);
        let mut cols = a.row_to_col.clone();
        cols.sort_unstable();
        prop_assert_eq!(cols, (0..q.nrows()).collect::<Vec<_>>());
        let total: f64 = a.row_to_col.iter().enumerate().map(|(i, &j)| q[[i, j]]).sum();
        prop_assert!((total - a.value).abs() < 1e-9);
    }

    #[test]
    fn optimum_dominates_greedy(q in any_square()) {
        let inst = UnitSupplyInstance::uniform(q).unwrap();
        let greedy = enumerate_greedy_value(&inst).unwrap();
        prop_assert!(assignment_optimal_value(&inst).unwrap().value >= greedy - 1e-9);
    }

    #[test]
    fn opls_never_beats_the_optimum(q in any_square()) {
        let inst = UnitSupplyInstance::uniform(q).unwrap();
        let opls = enumerate_policy_value(&inst, &inst.opls_policy(1.0).unwrap()).unwrap();
        prop_assert!(assignment_optimal_value(&inst).unwrap().value >= opls - 1e-9);
    }

    #[test]
    fn top_rank_modification_is_greedy(q in any_square().prop_map(row_sorted)) {
        let inst = UnitSupplyInstance::uniform(q).unwrap();
        let greedy = greedy_value_closed_form(&inst).unwrap();
        for j in 0..inst.users() {
            prop_assert_eq!(greedy_gap_lower_bound(&inst, j, 0).unwrap(), 0.0);
            prop_assert_eq!(modified_policy_value(&inst, j, 0).unwrap(), greedy);
        }
    }

    #[test]
    fn permutation_gain_scales_by_population(q in (2usize..=5).prop_flat_map(square).prop_map(row_sorted)) {
        let inst = UnitSupplyInstance::uniform(q).unwrap();
        let n = inst.users() as f64;
        let greedy = enumerate_greedy_value(&inst).unwrap();
        for j in 0..inst.users() {
            for k in 0..inst.actions() {
                let gain = permutation_modified_policy_value(&inst, j, k).unwrap() - greedy;
                let bound = greedy_gap_lower_bound(&inst, j, k).unwrap();
                prop_assert!((gain - bound * n / (n - 1.0)).abs() < 1e-9, "gain {} bound {}", gain, bound);
            }
        }
    }

    #[test]
    fn iid_optimum_dominates_modified_policies(
        q in (1usize..=4).prop_flat_map(square).prop_map(row_sorted),
        raw in prop::collection::vec(0.05f64..1.0, 4),
    ) {
        let users = q.nrows();
        let total: f64 = raw[..users].iter().sum();
        let inst = UnitSupplyInstance::new(q, raw[..users].iter().map(|w| w / total).collect()).unwrap();
        let best = iid_optimal_value(&inst).unwrap();
        let greedy = iid_greedy_value(&inst).unwrap();
        prop_assert!((greedy - greedy_value_closed_form(&inst).unwrap()).abs() < 1e-9);
        for j in 0..users {
            for k in 0..inst.actions() {
                let v = iid_modified_policy_value(&inst, j, k).unwrap();
                prop_assert!((v - modified_policy_value(&inst, j, k).unwrap()).abs() < 1e-9);
                prop_assert!(best >= v - 1e-9);
            }
        }
    }
}

#[test]
fn seven_user_instances_respect_the_bound() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let q = row_sorted(Array2::from_shape_simple_fn((7, 7), || rng.random::<f64>()));
        let inst = UnitSupplyInstance::uniform(q).unwrap();
        let gap = assignment_optimal_value(&inst).unwrap().value - enumerate_greedy_value(&inst).unwrap();
        for j in 0..7 {
            for k in 0..7 {
                assert!(gap >= greedy_gap_lower_bound(&inst, j, k).unwrap());
            }
        }
    }
}

#[test]
fn coupon_bound_and_optimum() {
    let q = ndarray::array![[80.0, 250.0, 200.0], [100.0, 280.0, 120.0], [60.0, 100.0, 70.0]];
    let inst = UnitSupplyInstance::uniform(q).unwrap();
    // x1 taking 70%OFF, the second-ranked coupon
    assert!((greedy_gap_lower_bound(&inst, 0, 1).unwrap() - 10.0).abs() < 1e-9);
    assert!(assignment_optimal_value(&inst).unwrap().value - enumerate_greedy_value(&inst).unwrap() >= 10.0);
}
