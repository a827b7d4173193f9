//! Shared domain types: the user population, the action set, per-action
//! inventory and the logged tuples an episode produces.
//!
//! Inventory follows a deterministic transition: a consumed recommendation
//! removes exactly one unit of the recommended action and nothing else.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// A finite pool of users with context vectors and an arrival distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPopulation {
    features: Array2<f64>,
    weights: Vec<f64>,
}

impl UserPopulation {
    pub fn new(features: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        let users = features.nrows();
        if users == 0 {
            return Err(Error::invalid("population", "at least one user is required"));
        }
        if weights.len() != users {
            return Err(Error::invalid("weights", format!("expected {users} weights, found {}", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::invalid("weights", format!("weights sum to {total}, not 1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features", "feature rows must be finite"));
        }
        Ok(Self { features, weights })
    }

    /// Population with uniform arrival probabilities.
    pub fn uniform(features: Array2<f64>) -> Result<Self> {
        let users = features.nrows();
        let weights = vec![1.0 / users.max(1) as f64; users];
        Self::new(features, weights)
    }

    /// Featureless population of `users` indistinguishable contexts.
    pub fn anonymous(users: usize) -> Result<Self> {
        Self::uniform(Array2::zeros((users, 0)))
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let expected = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - expected).abs() <= WEIGHT_TOLERANCE)
    }

    /// Arrival-weighted mean of each column of a `users x actions` matrix.
    pub fn weighted_column_means(&self, matrix: &Array2<f64>) -> Vec<f64> {
        debug_assert_eq!(matrix.nrows(), self.len());
        (0..matrix.ncols()).map(|a| self.weights.iter().zip(matrix.column(a)).map(|(w, v)| w * v).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    count: usize,
    labels: Option<Vec<String>>,
}

impl ActionSet {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("actions", "at least one action is required"));
        }
        Ok(Self { count, labels: None })
    }

    pub fn labelled<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut set = Self::new(labels.len())?;
        set.labels = Some(labels);
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn label(&self, action: usize) -> String {
        match &self.labels {
            Some(labels) => labels[action].clone(),
            None => format!("a{}", action + 1),
        }
    }
}

/// Remaining units per action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InventoryState {
    stock: Vec<u32>,
}

impl InventoryState {
    pub fn new(stock: Vec<u32>) -> Self {
        Self { stock }
    }

    pub fn unit(actions: usize) -> Self {
        Self::new(vec![1; actions])
    }

    pub fn stock(&self) -> &[u32] {
        &self.stock
    }

    pub fn len(&self) -> usize {
        self.stock.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stock.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.stock.iter().map(|&s| u64::from(s)).sum()
    }

    #[inline]
    pub fn is_available(&self, action: usize) -> bool {
        self.stock.get(action).is_some_and(|&s| s > 0)
    }

    pub fn any_available(&self) -> bool {
        self.stock.iter().any(|&s| s > 0)
    }

    /// Indices with positive stock, ascending.
    pub fn available_actions(&self) -> Vec<usize> {
        self.stock.iter().enumerate().filter(|(_, &s)| s > 0).map(|(a, _)| a).collect()
    }

    /// Applies one transition and returns the successor state.
    pub fn update_inventory(&self, action: usize, consumed: bool) -> Result<Self> {
        let mut next = self.clone();
        next.consume(action, consumed)?;
        Ok(next)
    }

    /// In-place form of [`InventoryState::update_inventory`].
    pub fn consume(&mut self, action: usize, consumed: bool) -> Result<()> {
        let count = self.stock.len();
        let slot = self.stock.get_mut(action).ok_or(Error::ActionOutOfRange { action, count })?;
        if *slot == 0 {
            return Err(Error::OutOfStock { action });
        }
        if consumed {
            *slot -= 1;
        }
        Ok(())
    }
}

impl fmt::Display for InventoryState {
    /// Bracketed integer list, e.g. `[1,0,2]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.stock.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("]")
    }
}

/// One logged decision `(x, a, c, r, s)`; `stock_before` is the state at decision time.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedTuple {
    pub t: usize,
    pub user: usize,
    pub action: usize,
    pub consumed: bool,
    pub reward: f64,
    pub stock_before: InventoryState,
}

impl LoggedTuple {
    /// The realized contribution `c * r`.
    pub fn value(&self) -> f64 {
        if self.consumed {
            self.reward
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub tuples: Vec<LoggedTuple>,
    pub realized_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Checks the transition contract between consecutive tuples, given the
    /// state after the last tuple.
    pub fn check_conservation(&self, initial: &InventoryState) -> Result<InventoryState> {
        let mut state = initial.clone();
        let mut last_t = 0;
        for tuple in &self.tuples {
            if tuple.t <= last_t {
                return Err(Error::invalid("trajectory", "time indices must increase"));
            }
            last_t = tuple.t;
            if tuple.stock_before != state {
                return Err(Error::invalid(
                    "trajectory",
                    format!("stock at t={} does not follow the transition", tuple.t),
                ));
            }
            state.consume(tuple.action, tuple.consumed)?;
        }
        Ok(state)
    }
}

/// Logged episodes collected under one logging policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoggedDataset {
    pub trajectories: Vec<Trajectory>,
}

impl LoggedDataset {
    pub fn tuples(&self) -> impl Iterator<Item = &LoggedTuple> {
        self.trajectories.iter().flat_map(|t| t.tuples.iter())
    }

    pub fn len(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn available_actions_lists_positive_stock() {
        assert_eq!(InventoryState::new(vec![1, 0, 2]).available_actions(), vec![0, 2]);
        assert!(InventoryState::new(vec![0, 0, 0]).available_actions().is_empty());
        assert_eq!(InventoryState::unit(3).available_actions(), vec![0, 1, 2]);
    }

    #[test]
    fn update_inventory_decrements_on_consumption() {
        let s = InventoryState::new(vec![1, 2]);
        assert_eq!(s.update_inventory(0, true).unwrap().stock(), &[0, 2]);
        assert_eq!(s.update_inventory(1, false).unwrap(), s);
    }

    #[test]
    fn update_inventory_rejects_depleted_action() {
        let s = InventoryState::new(vec![1, 2]);
        let once = s.update_inventory(0, true).unwrap();
        assert!(matches!(once.update_inventory(0, true), Err(Error::OutOfStock { action: 0 })));
        // a zero-consumption recommendation of a depleted action is still a contract violation
        assert!(once.update_inventory(0, false).is_err());
        assert!(s.update_inventory(5, true).is_err());
    }

    #[test]
    fn stock_display_is_bracketed_list() {
        assert_eq!(InventoryState::new(vec![3, 0, 12]).to_string(), "[3,0,12]");
        assert_eq!(InventoryState::new(vec![]).to_string(), "[]");
    }

    #[test]
    fn population_validates_weights() {
        let feats = Array2::zeros((2, 3));
        assert!(UserPopulation::new(feats.clone(), vec![0.5, 0.5]).is_ok());
        assert!(UserPopulation::new(feats.clone(), vec![0.5, 0.6]).is_err());
        assert!(UserPopulation::new(feats.clone(), vec![1.5, -0.5]).is_err());
        assert!(UserPopulation::new(feats, vec![1.0]).is_err());
        assert!(UserPopulation::anonymous(0).is_err());
        let mut bad = Array2::zeros((1, 1));
        bad[[0, 0]] = f64::NAN;
        assert!(UserPopulation::uniform(bad).is_err());
    }

    #[test]
    fn conservation_check_detects_tampering() {
        let s0 = InventoryState::new(vec![1, 1]);
        let mut traj = Trajectory {
            tuples: vec![
                LoggedTuple { t: 1, user: 0, action: 0, consumed: true, reward: 1.0, stock_before: s0.clone() },
                LoggedTuple {
                    t: 2,
                    user: 0,
                    action: 1,
                    consumed: true,
                    reward: 1.0,
                    stock_before: InventoryState::new(vec![0, 1]),
                },
            ],
            realized_value: 2.0,
        };
        assert_eq!(traj.check_conservation(&s0).unwrap().stock(), &[0, 0]);
        traj.tuples[1].stock_before = InventoryState::new(vec![1, 1]);
        assert!(traj.check_conservation(&s0).is_err());
    }
}
