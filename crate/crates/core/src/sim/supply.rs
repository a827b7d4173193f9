use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{InventoryState, UserPopulation};
use crate::error::{Error, Result};
use crate::reward::RewardModel;

/// Rule mapping demand `E_p[q(x, a)]` to starting stock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyScheme {
    /// `s_max * E[q(., a)] / max_a' E[q(., a')]`
    Proportional,
    /// `s_max * min_a' E[q(., a')] / sqrt(E[q(., a)])`
    InverseProportional,
    /// Independent uniform integers in `[1, s_max]`.
    Random,
}

/// Starting stock per action. Real-valued scheme outputs are rounded to the
/// nearest integer with a floor of one unit.
pub fn initial_supply<R: Rng + ?Sized>(
    scheme: SupplyScheme,
    s_max: u32,
    model: &RewardModel,
    population: &UserPopulation,
    rng: &mut R,
) -> Result<InventoryState> {
    if s_max == 0 {
        return Err(Error::invalid("s_max", "must be at least 1"));
    }
    let actions = model.actions();
    let s_max_f = f64::from(s_max);
    let demand = || model.expected_by_action(population);
    let stock = match scheme {
        SupplyScheme::Random => (0..actions).map(|_| rng.random_range(1..=s_max)).collect(),
        SupplyScheme::Proportional => {
            let demand = demand();
            let max = demand.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max.is_nan() || max <= 0.0 {
                return Err(Error::invalid("supply", "proportional supply needs positive demand"));
            }
            demand.iter().map(|d| to_units(s_max_f * d / max)).collect()
        }
        SupplyScheme::InverseProportional => {
            let demand = demand();
            if demand.iter().any(|&d| d.is_nan() || d <= 0.0) {
                return Err(Error::invalid(
                    "supply",
                    "inverse proportional supply needs positive demand for every action",
                ));
            }
            let min = demand.iter().copied().fold(f64::INFINITY, f64::min);
            demand.iter().map(|d| to_units(s_max_f * min / d.sqrt())).collect()
        }
    };
    Ok(InventoryState::new(stock))
}

fn to_units(x: f64) -> u32 {
    x.round().clamp(1.0, f64::from(u32::MAX)) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pop(n: usize) -> UserPopulation {
        UserPopulation::anonymous(n).unwrap()
    }

    #[test]
    fn proportional_equal_demand_is_s_max() {
        let m = RewardModel::always_consumed(Array2::from_elem((3, 4), 0.7)).unwrap();
        let s = initial_supply(SupplyScheme::Proportional, 20, &m, &pop(3), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.stock(), &[20, 20, 20, 20]);
    }

    #[test]
    fn proportional_max_demand_gets_s_max() {
        let m = RewardModel::always_consumed(array![[1.0, 4.0, 0.01], [3.0, 4.0, 0.01]]).unwrap();
        let s = initial_supply(SupplyScheme::Proportional, 20, &m, &pop(2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.stock(), &[10, 20, 1]);
    }

    #[test]
    fn inverse_proportional_example() {
        let m = RewardModel::always_consumed(array![[1.0, 4.0]]).unwrap();
        let s = initial_supply(SupplyScheme::InverseProportional, 20, &m, &pop(1), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(s.stock(), &[20, 10]);
    }

    #[test]
    fn inverse_proportional_rejects_zero_demand() {
        let m = RewardModel::always_consumed(array![[1.0, 0.0]]).unwrap();
        assert!(initial_supply(SupplyScheme::InverseProportional, 20, &m, &pop(1), &mut ChaCha8Rng::seed_from_u64(0))
            .is_err());
    }

    #[test]
    fn random_is_within_bounds() {
        let m = RewardModel::always_consumed(Array2::ones((2, 500))).unwrap();
        let s = initial_supply(SupplyScheme::Random, 5, &m, &pop(2), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(s.stock().iter().all(|&u| (1..=5).contains(&u)));
        assert!(s.stock().contains(&1) && s.stock().contains(&5));
    }

    #[test]
    fn zero_s_max_rejected() {
        let m = RewardModel::always_consumed(Array2::ones((1, 1))).unwrap();
        assert!(initial_supply(SupplyScheme::Random, 0, &m, &pop(1), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
