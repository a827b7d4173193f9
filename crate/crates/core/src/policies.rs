//! Decision rules over the currently available actions.
//!
//! * greedy: highest estimated reward `q_hat(x, a)`.
//! * relative gap: highest `q_hat(x, a) - beta * m_a`, where `m_a` is the
//!   arrival-weighted population mean of `q_hat(., a)`. `beta = 1` is the
//!   plain relative reward gap, `beta = 0` is greedy.
//! * mixed: relative gap among actions forecast to sell out, greedy among
//!   the rest, then the better of the two candidates by `q_hat(x, .)`.
//! * softmax logging: samples `a` with probability proportional to
//!   `exp(beta * q_hat(x, a))` over available actions.
//!
//! Every argmax breaks ties toward the lowest action index.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{InventoryState, UserPopulation};
use crate::error::{Error, Result};
use crate::reward::RewardEstimate;

/// Split of the action set into items forecast to sell out by the horizon
/// and items forecast to remain in stock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyPartition {
    sold: Vec<bool>,
}

impl SupplyPartition {
    pub fn from_sold_flags(sold: Vec<bool>) -> Self {
        Self { sold }
    }

    pub fn all_sold(actions: usize) -> Self {
        Self { sold: vec![true; actions] }
    }

    pub fn all_unsold(actions: usize) -> Self {
        Self { sold: vec![false; actions] }
    }

    pub fn is_sold(&self, action: usize) -> bool {
        self.sold[action]
    }

    pub fn len(&self) -> usize {
        self.sold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sold.is_empty()
    }

    pub fn sold(&self) -> Vec<usize> {
        (0..self.sold.len()).filter(|&a| self.sold[a]).collect()
    }

    pub fn unsold(&self) -> Vec<usize> {
        (0..self.sold.len()).filter(|&a| !self.sold[a]).collect()
    }
}

/// Naive end-of-horizon stock forecast assuming every step recommends an
/// action uniformly at random:
/// `s_T[a] = s_0[a] - T * mean_p(q_c(., a)) / K`.
pub fn depletion_forecast(
    initial: &InventoryState,
    horizon: usize,
    q_c: &Array2<f64>,
    weights: &[f64],
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let actions = q_c.ncols();
    if initial.len() != actions {
        return Err(Error::ShapeMismatch { expected: (1, actions), found: (1, initial.len()) });
    }
    if weights.len() != q_c.nrows() {
        return Err(Error::ShapeMismatch { expected: (q_c.nrows(), actions), found: (weights.len(), actions) });
    }
    Ok((0..actions)
        .map(|a| {
            let mean_consumption: f64 = weights.iter().zip(q_c.column(a)).map(|(w, p)| w * p).sum();
            f64::from(initial.stock()[a]) - horizon as f64 * mean_consumption / actions as f64
        })
        .collect())
}

pub fn partition_by_depletion(
    initial: &InventoryState,
    horizon: usize,
    q_c: &Array2<f64>,
    weights: &[f64],
) -> Result<SupplyPartition> {
    let forecast = depletion_forecast(initial, horizon, q_c, weights)?;
    Ok(SupplyPartition { sold: forecast.into_iter().map(|s| s <= 0.0).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Greedy,
    Opls { beta: f64 },
    OplsMixed { beta: f64, partition: SupplyPartition },
    SoftmaxLogging { beta: f64 },
}

/// A decision rule bound to a reward estimate. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Policy {
    kind: PolicyKind,
    estimate: Arc<RewardEstimate>,
    population_means: Arc<[f64]>,
}

impl Policy {
    pub fn new(kind: PolicyKind, estimate: Arc<RewardEstimate>, population: &UserPopulation) -> Result<Self> {
        if estimate.users() != population.len() {
            return Err(Error::ShapeMismatch {
                expected: (population.len(), estimate.actions()),
                found: (estimate.users(), estimate.actions()),
            });
        }
        match &kind {
            PolicyKind::Opls { beta } | PolicyKind::OplsMixed { beta, .. } if !(0.0..=1.0).contains(beta) => {
                return Err(Error::invalid("beta_fairness", format!("{beta} is outside [0, 1]")));
            }
            PolicyKind::OplsMixed { partition, .. } if partition.len() != estimate.actions() => {
                return Err(Error::invalid("partition", "partition must cover every action"));
            }
            PolicyKind::SoftmaxLogging { beta } if !beta.is_finite() => {
                return Err(Error::invalid("beta_logging", "must be finite"));
            }
            _ => {}
        }
        let population_means = population.weighted_column_means(estimate.q_hat()).into();
        Ok(Self { kind, estimate, population_means })
    }

    pub fn greedy(estimate: Arc<RewardEstimate>, population: &UserPopulation) -> Result<Self> {
        Self::new(PolicyKind::Greedy, estimate, population)
    }

    pub fn opls(estimate: Arc<RewardEstimate>, population: &UserPopulation, beta: f64) -> Result<Self> {
        Self::new(PolicyKind::Opls { beta }, estimate, population)
    }

    pub fn opls_mixed(
        estimate: Arc<RewardEstimate>,
        population: &UserPopulation,
        beta: f64,
        partition: SupplyPartition,
    ) -> Result<Self> {
        Self::new(PolicyKind::OplsMixed { beta, partition }, estimate, population)
    }

    pub fn softmax_logging(estimate: Arc<RewardEstimate>, population: &UserPopulation, beta: f64) -> Result<Self> {
        Self::new(PolicyKind::SoftmaxLogging { beta }, estimate, population)
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn estimate(&self) -> &RewardEstimate {
        &self.estimate
    }

    pub fn population_means(&self) -> &[f64] {
        &self.population_means
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PolicyKind::Greedy => "greedy",
            PolicyKind::Opls { .. } => "opls",
            PolicyKind::OplsMixed { .. } => "opls_mixed",
            PolicyKind::SoftmaxLogging { .. } => "softmax_logging",
        }
    }

    /// Whether the choice is a pure function of `(user, stock)`.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self.kind, PolicyKind::SoftmaxLogging { .. })
    }

    pub fn select<R: Rng + ?Sized>(&self, user: usize, stock: &InventoryState, rng: &mut R) -> Result<usize> {
        self.check_user(user)?;
        match &self.kind {
            PolicyKind::Greedy => self.greedy_select(user, stock),
            PolicyKind::Opls { beta } => self.relative_argmax(user, stock, *beta, |_| true),
            PolicyKind::OplsMixed { beta, partition } => self.mixed_select(user, stock, *beta, partition),
            PolicyKind::SoftmaxLogging { beta } => self.softmax_select(user, stock, *beta, rng),
        }
    }

    /// `argmax_{a available} q_hat(x, a)`, regardless of the bound kind.
    pub fn greedy_select(&self, user: usize, stock: &InventoryState) -> Result<usize> {
        self.check_user(user)?;
        let row = self.estimate.q_hat().row(user);
        argmax(stock, |a| row[a], |_| true).ok_or(Error::NoAvailableAction)
    }

    /// `argmax_{a available} q_hat(x, a) - beta * m_a`.
    pub fn opls_select(&self, user: usize, stock: &InventoryState, beta: f64) -> Result<usize> {
        self.check_user(user)?;
        self.relative_argmax(user, stock, beta, |_| true)
    }

    fn relative_argmax(
        &self,
        user: usize,
        stock: &InventoryState,
        beta: f64,
        include: impl Fn(usize) -> bool,
    ) -> Result<usize> {
        let row = self.estimate.q_hat().row(user);
        let means = &self.population_means;
        argmax(stock, |a| row[a] - beta * means[a], include).ok_or(Error::NoAvailableAction)
    }

    fn mixed_select(
        &self,
        user: usize,
        stock: &InventoryState,
        beta: f64,
        partition: &SupplyPartition,
    ) -> Result<usize> {
        let row = self.estimate.q_hat().row(user);
        let means = &self.population_means;
        let sold = argmax(stock, |a| row[a] - beta * means[a], |a| partition.is_sold(a));
        let unsold = argmax(stock, |a| row[a], |a| !partition.is_sold(a));
        match (sold, unsold) {
            (Some(s), Some(u)) => Ok(if row[s] > row[u] { s } else { u }),
            (Some(s), None) => Ok(s),
            (None, Some(u)) => Ok(u),
            (None, None) => Err(Error::NoAvailableAction),
        }
    }

    /// Selection probabilities over available actions, in ascending index order.
    pub fn softmax_probabilities(&self, user: usize, stock: &InventoryState, beta: f64) -> Result<Vec<(usize, f64)>> {
        self.check_user(user)?;
        let row = self.estimate.q_hat().row(user);
        let available = stock.available_actions();
        if available.is_empty() {
            return Err(Error::NoAvailableAction);
        }
        let max = available.iter().map(|&a| beta * row[a]).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = available.iter().map(|&a| (beta * row[a] - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        Ok(available.into_iter().zip(weights).map(|(a, w)| (a, w / total)).collect())
    }

    fn softmax_select<R: Rng + ?Sized>(
        &self,
        user: usize,
        stock: &InventoryState,
        beta: f64,
        rng: &mut R,
    ) -> Result<usize> {
        let probs = self.softmax_probabilities(user, stock, beta)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(a, p) in &probs {
            acc += p;
            if u < acc {
                return Ok(a);
            }
        }
        // rounding left `acc` just below 1
        Ok(probs.last().map(|&(a, _)| a).expect("nonempty"))
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.estimate.users() {
            return Err(Error::UserOutOfRange { user, count: self.estimate.users() });
        }
        Ok(())
    }
}

fn argmax(stock: &InventoryState, score: impl Fn(usize) -> f64, include: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (a, &units) in stock.stock().iter().enumerate() {
        if units == 0 || !include(a) {
            continue;
        }
        let s = score(a);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((a, s));
        }
    }
    best.map(|(a, _)| a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{Provenance, RewardModel};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // columns: 30%OFF, 50%OFF, 70%OFF
    fn coupon() -> (Arc<RewardEstimate>, UserPopulation) {
        let q = array![[80.0, 250.0, 200.0], [100.0, 280.0, 120.0], [60.0, 100.0, 70.0]];
        let model = RewardModel::always_consumed(q).unwrap();
        (Arc::new(RewardEstimate::exact(&model)), UserPopulation::anonymous(3).unwrap())
    }

    #[test]
    fn coupon_means_match_hand_values() {
        let (est, pop) = coupon();
        let p = Policy::opls(est, &pop, 1.0).unwrap();
        let means = p.population_means();
        for (m, expected) in means.iter().zip([80.0, 210.0, 130.0]) {
            assert!((m - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_on_coupon() {
        let (est, pop) = coupon();
        let p = Policy::greedy(est, &pop).unwrap();
        let full = InventoryState::unit(3);
        assert_eq!(p.greedy_select(0, &full).unwrap(), 1);
        let no_fifty = InventoryState::new(vec![1, 0, 1]);
        assert_eq!(p.greedy_select(1, &no_fifty).unwrap(), 2);
        assert_eq!(p.greedy_select(2, &InventoryState::new(vec![1, 0, 0])).unwrap(), 0);
        assert!(matches!(p.greedy_select(0, &InventoryState::new(vec![0, 0, 0])), Err(Error::NoAvailableAction)));
    }

    #[test]
    fn opls_on_coupon() {
        let (est, pop) = coupon();
        let p = Policy::opls(est, &pop, 1.0).unwrap();
        let full = InventoryState::unit(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.select(0, &full, &mut rng).unwrap(), 2);
        assert_eq!(p.select(1, &full, &mut rng).unwrap(), 1);
        assert_eq!(p.select(2, &full, &mut rng).unwrap(), 0);
    }

    #[test]
    fn opls_with_zero_beta_is_greedy() {
        let (est, pop) = coupon();
        let p = Policy::opls(est, &pop, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for stock in [vec![1, 1, 1], vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 0]] {
            let s = InventoryState::new(stock);
            for user in 0..3 {
                assert_eq!(p.select(user, &s, &mut rng).unwrap(), p.greedy_select(user, &s).unwrap());
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let est = Arc::new(RewardEstimate::new(array![[1.0, 3.0, 3.0, 3.0]], Provenance::Exact).unwrap());
        let pop = UserPopulation::anonymous(1).unwrap();
        let p = Policy::greedy(est.clone(), &pop).unwrap();
        assert_eq!(p.greedy_select(0, &InventoryState::unit(4)).unwrap(), 1);
        assert_eq!(p.greedy_select(0, &InventoryState::new(vec![1, 0, 1, 1])).unwrap(), 2);
        let p = Policy::opls(est, &pop, 1.0).unwrap();
        // single user: every gap is zero
        assert_eq!(p.opls_select(0, &InventoryState::unit(4), 1.0).unwrap(), 0);
    }

    #[test]
    fn singleton_availability_forces_choice() {
        let (est, pop) = coupon();
        let only = InventoryState::new(vec![0, 0, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for policy in [
            Policy::greedy(est.clone(), &pop).unwrap(),
            Policy::opls(est.clone(), &pop, 1.0).unwrap(),
            Policy::opls_mixed(est.clone(), &pop, 1.0, SupplyPartition::all_sold(3)).unwrap(),
            Policy::softmax_logging(est.clone(), &pop, 2.0).unwrap(),
        ] {
            for user in 0..3 {
                assert_eq!(policy.select(user, &only, &mut rng).unwrap(), 2);
            }
        }
    }

    #[test]
    fn mixed_reduces_to_components() {
        let (est, pop) = coupon();
        let greedy = Policy::greedy(est.clone(), &pop).unwrap();
        let opls = Policy::opls(est.clone(), &pop, 1.0).unwrap();
        let none_sold = Policy::opls_mixed(est.clone(), &pop, 1.0, SupplyPartition::all_unsold(3)).unwrap();
        let all_sold = Policy::opls_mixed(est, &pop, 1.0, SupplyPartition::all_sold(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for bits in 1..8u32 {
            let s = InventoryState::new((0..3).map(|a| (bits >> a) & 1).collect());
            for user in 0..3 {
                let g = greedy.select(user, &s, &mut rng).unwrap();
                let o = opls.select(user, &s, &mut rng).unwrap();
                assert_eq!(none_sold.select(user, &s, &mut rng).unwrap(), g);
                assert_eq!(all_sold.select(user, &s, &mut rng).unwrap(), o);
            }
        }
        // x2 under all-sold takes 50%OFF (gap 70)
        assert_eq!(all_sold.select(1, &InventoryState::unit(3), &mut rng).unwrap(), 1);
    }

    #[test]
    fn mixed_compares_candidates_by_absolute_estimate() {
        let (est, pop) = coupon();
        // 70%OFF sold (relative pick for x1 is 70%OFF at 200), rest unsold (greedy pick 50%OFF at 250)
        let partition = SupplyPartition::from_sold_flags(vec![false, false, true]);
        let p = Policy::opls_mixed(est, &pop, 1.0, partition).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.select(0, &InventoryState::unit(3), &mut rng).unwrap(), 1);
        assert_eq!(p.select(0, &InventoryState::new(vec![1, 0, 1]), &mut rng).unwrap(), 2);
    }

    #[test]
    fn mixed_tie_prefers_unsold_candidate() {
        let est = Arc::new(RewardEstimate::new(array![[5.0, 5.0], [1.0, 0.0]], Provenance::Exact).unwrap());
        let pop = UserPopulation::anonymous(2).unwrap();
        let p = Policy::opls_mixed(est, &pop, 1.0, SupplyPartition::from_sold_flags(vec![true, false])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.select(0, &InventoryState::unit(2), &mut rng).unwrap(), 1);
    }

    #[test]
    fn partition_forecast_examples() {
        let q_c = Array2::ones((1, 2));
        let part = partition_by_depletion(&InventoryState::new(vec![1, 100]), 10, &q_c, &[1.0]).unwrap();
        assert_eq!(part.sold(), vec![0]);
        assert_eq!(part.unsold(), vec![1]);
        let forecast = depletion_forecast(&InventoryState::new(vec![1, 100]), 10, &q_c, &[1.0]).unwrap();
        assert_eq!(forecast, vec![-4.0, 95.0]);

        let q_c = Array2::from_elem((3, 4), 0.1);
        let part = partition_by_depletion(&InventoryState::unit(4), 1, &q_c, &[1.0 / 3.0; 3]).unwrap();
        assert!(part.sold().is_empty());

        let q_c = Array2::ones((2, 3));
        let part = partition_by_depletion(&InventoryState::new(vec![7, 9, 7]), 7, &q_c, &[0.5, 0.5]).unwrap();
        assert!(part.sold().is_empty());

        assert!(partition_by_depletion(&InventoryState::unit(3), 0, &q_c, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn softmax_probabilities_normalize() {
        let (est, pop) = coupon();
        let p = Policy::softmax_logging(est, &pop, 0.01).unwrap();
        for stock in [vec![1, 1, 1], vec![0, 1, 1], vec![1, 0, 0]] {
            let probs = p.softmax_probabilities(0, &InventoryState::new(stock), 0.01).unwrap();
            let total: f64 = probs.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_construction_is_rejected() {
        let (est, pop) = coupon();
        assert!(Policy::opls(est.clone(), &pop, 1.5).is_err());
        assert!(Policy::opls_mixed(est.clone(), &pop, 1.0, SupplyPartition::all_sold(2)).is_err());
        assert!(Policy::greedy(est.clone(), &UserPopulation::anonymous(2).unwrap()).is_err());
        let p = Policy::greedy(est, &pop).unwrap();
        assert!(matches!(p.greedy_select(3, &InventoryState::unit(3)), Err(Error::UserOutOfRange { .. })));
    }
}
