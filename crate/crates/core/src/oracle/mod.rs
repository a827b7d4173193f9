//! Exact values for small unit-supply instances.
//!
//! Every action has one unit and every recommendation is consumed, so an
//! episode of `K` steps hands out each action exactly once. Two arrival
//! models are supported:
//!
//! * **permutation**: every user arrives exactly once, in one of the `J!`
//!   orders, uniformly at random (requires uniform `p(x)`);
//! * **iid**: each of the `K` steps draws a user from `p(x)` independently.
//!
//! The greedy closed form `sum_k E[q(x, a_k)]` holds under both models for
//! instances with a shared preference order. The modified-policy value
//! (play `a_k` for `x_j` at the first step, greedy afterwards) holds exactly
//! under the iid model; under the permutation model the improvement over
//! greedy is larger by a factor `J / (J - 1)`.

mod assignment;

use std::collections::HashMap;
use std::sync::Arc;

use itertools::Itertools;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{InventoryState, UserPopulation};
use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::reward::{Provenance, RewardEstimate};

pub use assignment::{max_weight_assignment, Assignment};

/// Largest population enumerated over all arrival orders.
pub const MAX_ENUMERATED_USERS: usize = 8;
/// Largest action set handled by the subset recursion.
pub const MAX_RECURSION_ACTIONS: usize = 20;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// `J x K` expected rewards with one unit of stock per action.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSupplyInstance {
    q: Array2<f64>,
    weights: Vec<f64>,
    /// Original column indices in descending preference order, when all
    /// rows agree on one.
    shared_order: Option<Vec<usize>>,
}

impl UnitSupplyInstance {
    pub fn new(q: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        let (users, actions) = q.dim();
        if users == 0 || actions == 0 {
            return Err(Error::invalid("instance", "need at least one user and one action"));
        }
        if weights.len() != users {
            return Err(Error::invalid("weights", format!("expected {users} weights")));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || (weights.iter().sum::<f64>() - 1.0).abs() > WEIGHT_TOLERANCE
        {
            return Err(Error::invalid("weights", "must be a probability vector"));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("q", "entries must be finite"));
        }
        let shared_order = detect_shared_order(&q);
        Ok(Self { q, weights, shared_order })
    }

    pub fn uniform(q: Array2<f64>) -> Result<Self> {
        let users = q.nrows();
        Self::new(q, vec![1.0 / users.max(1) as f64; users])
    }

    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn users(&self) -> usize {
        self.q.nrows()
    }

    pub fn actions(&self) -> usize {
        self.q.ncols()
    }

    pub fn has_shared_order(&self) -> bool {
        self.shared_order.is_some()
    }

    /// Original column indices from most to least preferred.
    pub fn shared_order(&self) -> Option<&[usize]> {
        self.shared_order.as_deref()
    }

    /// `E_p[q(x, a)]` per original action index.
    pub fn expected_by_action(&self) -> Vec<f64> {
        (0..self.actions()).map(|a| self.weights.iter().zip(self.q.column(a)).map(|(w, v)| w * v).sum()).collect()
    }

    pub fn population(&self) -> Result<UserPopulation> {
        UserPopulation::new(Array2::zeros((self.users(), 0)), self.weights.clone())
    }

    pub fn estimate(&self) -> RewardEstimate {
        RewardEstimate::new(self.q.clone(), Provenance::Exact).expect("finite by construction")
    }

    pub fn greedy_policy(&self) -> Result<Policy> {
        Policy::greedy(Arc::new(self.estimate()), &self.population()?)
    }

    pub fn opls_policy(&self, beta: f64) -> Result<Policy> {
        Policy::opls(Arc::new(self.estimate()), &self.population()?, beta)
    }

    fn require_shared_order(&self) -> Result<&[usize]> {
        self.shared_order.as_deref().ok_or(Error::NoSharedOrder)
    }

    fn require_square(&self) -> Result<()> {
        if self.users() != self.actions() {
            return Err(Error::invalid("instance", "requires as many users as actions"));
        }
        Ok(())
    }

    fn check_indices(&self, user: usize, rank: usize) -> Result<()> {
        if user >= self.users() {
            return Err(Error::UserOutOfRange { user, count: self.users() });
        }
        if rank >= self.actions() {
            return Err(Error::ActionOutOfRange { action: rank, count: self.actions() });
        }
        Ok(())
    }
}

fn detect_shared_order(q: &Array2<f64>) -> Option<Vec<usize>> {
    let sums: Vec<f64> = q.columns().into_iter().map(|c| c.sum()).collect();
    let mut order: Vec<usize> = (0..q.ncols()).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    let consistent = q.rows().into_iter().all(|row| order.windows(2).all(|w| row[w[0]] >= row[w[1]]));
    consistent.then_some(order)
}

/// Allocation and total for one arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderOutcome {
    pub order: Vec<usize>,
    /// `(user, action)` in arrival order.
    pub allocation: Vec<(usize, usize)>,
    pub total: f64,
}

/// Runs a deterministic policy over every arrival order, each user once,
/// in lexicographic order of the permutations.
pub fn enumerate_orders(inst: &UnitSupplyInstance, policy: &Policy) -> Result<Vec<OrderOutcome>> {
    // never drawn from: only deterministic policies are accepted
    let rng = std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(0));
    enumerate_orders_with(
        inst,
        |_, user, stock| policy.select(user, stock, &mut *rng.borrow_mut()),
        policy.is_deterministic(),
    )
}

fn enumerate_orders_with(
    inst: &UnitSupplyInstance,
    decide: impl Fn(usize, usize, &InventoryState) -> Result<usize>,
    deterministic: bool,
) -> Result<Vec<OrderOutcome>> {
    let users = inst.users();
    if users > MAX_ENUMERATED_USERS {
        return Err(Error::EnumerationTooLarge { users, limit: MAX_ENUMERATED_USERS });
    }
    if !deterministic {
        return Err(Error::invalid("policy", "order enumeration needs a deterministic policy"));
    }
    (0..users)
        .permutations(users)
        .map(|order| {
            let mut stock = InventoryState::unit(inst.actions());
            let mut allocation = Vec::with_capacity(users);
            let mut total = 0.0;
            for (step, &user) in order.iter().enumerate() {
                if !stock.any_available() {
                    break;
                }
                let action = decide(step, user, &stock)?;
                stock.consume(action, true)?;
                total += inst.q[[user, action]];
                allocation.push((user, action));
            }
            Ok(OrderOutcome { order, allocation, total })
        })
        .collect()
}

fn require_uniform(inst: &UnitSupplyInstance) -> Result<()> {
    let expected = 1.0 / inst.users() as f64;
    if inst.weights.iter().any(|w| (w - expected).abs() > WEIGHT_TOLERANCE) {
        return Err(Error::invalid("weights", "order enumeration is defined for uniform arrivals only"));
    }
    Ok(())
}

fn mean_total(outcomes: &[OrderOutcome]) -> f64 {
    outcomes.iter().map(|o| o.total).sum::<f64>() / outcomes.len() as f64
}

/// Average total of a deterministic policy over all `J!` arrival orders.
pub fn enumerate_policy_value(inst: &UnitSupplyInstance, policy: &Policy) -> Result<f64> {
    inst.require_square()?;
    require_uniform(inst)?;
    Ok(mean_total(&enumerate_orders(inst, policy)?))
}

/// Greedy value averaged over all `J!` arrival orders.
pub fn enumerate_greedy_value(inst: &UnitSupplyInstance) -> Result<f64> {
    enumerate_policy_value(inst, &inst.greedy_policy()?)
}

/// Order-independent optimum: the best one-to-one user/action matching.
pub fn assignment_optimal_value(inst: &UnitSupplyInstance) -> Result<Assignment> {
    inst.require_square()?;
    Ok(max_weight_assignment(&inst.q))
}

/// `sum_k E_p[q(x, a_k)]` for a shared-order instance.
pub fn greedy_value_closed_form(inst: &UnitSupplyInstance) -> Result<f64> {
    inst.require_shared_order()?;
    inst.require_square()?;
    Ok(inst.expected_by_action().iter().sum())
}

/// Relative-gap difference `(q(x_j, a_k) - E[q(., a_k)]) - (q(x_j, a_1) - E[q(., a_1)])`,
/// with `rank` counting from zero in the shared preference order.
fn gap_difference(inst: &UnitSupplyInstance, user: usize, rank: usize) -> Result<f64> {
    let order = inst.require_shared_order()?;
    inst.check_indices(user, rank)?;
    let means = inst.expected_by_action();
    let (top, chosen) = (order[0], order[rank]);
    Ok((inst.q[[user, chosen]] - means[chosen]) - (inst.q[[user, top]] - means[top]))
}

/// Lower bound on `V* - V_greedy` from playing the rank-`rank` action for
/// user `user` at the first step.
pub fn greedy_gap_lower_bound(inst: &UnitSupplyInstance, user: usize, rank: usize) -> Result<f64> {
    let gap = gap_difference(inst, user, rank)?;
    Ok(inst.weights[user] * gap)
}

/// Value of the policy that plays the rank-`rank` action for `user` at the
/// first step and is greedy afterwards, in closed form.
pub fn modified_policy_value(inst: &UnitSupplyInstance, user: usize, rank: usize) -> Result<f64> {
    Ok(greedy_gap_lower_bound(inst, user, rank)? + greedy_value_closed_form(inst)?)
}

fn greedy_on_mask(q: &Array2<f64>, user: usize, mask: u32) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for a in 0..q.ncols() {
        if mask & (1 << a) == 0 {
            continue;
        }
        let v = q[[user, a]];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    best.expect("mask nonempty").0
}

fn check_recursion_size(inst: &UnitSupplyInstance) -> Result<u32> {
    if inst.actions() > MAX_RECURSION_ACTIONS {
        return Err(Error::EnumerationTooLarge { users: inst.actions(), limit: MAX_RECURSION_ACTIONS });
    }
    Ok(((1u64 << inst.actions()) - 1) as u32)
}

/// Exact expected total under iid arrivals over `K` steps, for a rule
/// `decide(step, user, remaining_mask) -> action`. The expectation over all
/// `J^K` arrival sequences is computed by recursion on the remaining set.
pub fn iid_policy_value(inst: &UnitSupplyInstance, decide: impl Fn(usize, usize, u32) -> usize) -> Result<f64> {
    let full = check_recursion_size(inst)?;
    let mut memo = HashMap::new();
    Ok(iid_value_rec(inst, full, full, &decide, &mut memo))
}

fn iid_value_rec(
    inst: &UnitSupplyInstance,
    full: u32,
    mask: u32,
    decide: &impl Fn(usize, usize, u32) -> usize,
    memo: &mut HashMap<u32, f64>,
) -> f64 {
    if mask == 0 {
        return 0.0;
    }
    if let Some(&v) = memo.get(&mask) {
        return v;
    }
    let step = (full.count_ones() - mask.count_ones()) as usize;
    let mut value = 0.0;
    for (user, &w) in inst.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let action = decide(step, user, mask);
        debug_assert!(mask & (1 << action) != 0);
        value += w * (inst.q[[user, action]] + iid_value_rec(inst, full, mask & !(1 << action), decide, memo));
    }
    memo.insert(mask, value);
    value
}

/// Greedy value under iid arrivals, by exact recursion.
pub fn iid_greedy_value(inst: &UnitSupplyInstance) -> Result<f64> {
    iid_policy_value(inst, |_, user, mask| greedy_on_mask(&inst.q, user, mask))
}

/// Modified-policy value under iid arrivals, by exact recursion.
pub fn iid_modified_policy_value(inst: &UnitSupplyInstance, user: usize, rank: usize) -> Result<f64> {
    let order = inst.require_shared_order()?;
    inst.check_indices(user, rank)?;
    let forced = order[rank];
    iid_policy_value(
        inst,
        |step, u, mask| {
            if step == 0 && u == user {
                forced
            } else {
                greedy_on_mask(&inst.q, u, mask)
            }
        },
    )
}

/// Best adaptive policy value under iid arrivals (the policy sees the
/// current user and the remaining set).
pub fn iid_optimal_value(inst: &UnitSupplyInstance) -> Result<f64> {
    let full = check_recursion_size(inst)?;
    let mut memo = HashMap::new();
    Ok(iid_optimal_rec(inst, full, &mut memo))
}

fn iid_optimal_rec(inst: &UnitSupplyInstance, mask: u32, memo: &mut HashMap<u32, f64>) -> f64 {
    if mask == 0 {
        return 0.0;
    }
    if let Some(&v) = memo.get(&mask) {
        return v;
    }
    let continuation: Vec<(usize, f64)> = (0..inst.actions())
        .filter(|a| mask & (1 << a) != 0)
        .map(|a| (a, iid_optimal_rec(inst, mask & !(1 << a), memo)))
        .collect();
    let value = inst
        .weights
        .iter()
        .enumerate()
        .map(|(user, &w)| {
            let best = continuation.iter().map(|&(a, rest)| inst.q[[user, a]] + rest).fold(f64::NEG_INFINITY, f64::max);
            w * best
        })
        .sum();
    memo.insert(mask, value);
    value
}

/// Modified-policy value under the permutation model: the first arriving
/// user, if it is `user`, receives the rank-`rank` action.
pub fn permutation_modified_policy_value(inst: &UnitSupplyInstance, user: usize, rank: usize) -> Result<f64> {
    let order = inst.require_shared_order()?;
    inst.check_indices(user, rank)?;
    inst.require_square()?;
    require_uniform(inst)?;
    let forced = order[rank];
    let greedy = inst.greedy_policy()?;
    let outcomes = enumerate_orders_with(
        inst,
        |step, u, stock| {
            if step == 0 && u == user {
                Ok(forced)
            } else {
                greedy.greedy_select(u, stock)
            }
        },
        true,
    )?;
    Ok(mean_total(&outcomes))
}
