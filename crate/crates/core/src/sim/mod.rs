//! Episode simulation and Monte Carlo policy values.
//!
//! One step of an episode: draw a user, let the policy choose among the
//! available actions, draw consumption `c ~ Bernoulli(q_c)` and reward
//! `r ~ Normal(q_r, sigma)` (optionally truncated at zero), and decrement the
//! chosen action's stock when `c = 1`. The episode ends after `horizon`
//! steps or as soon as every action is sold out.
//!
//! Episodes are seeded from `(seed, episode index)` alone, so evaluating two
//! policies with the same seed pairs them on common random numbers.

mod export;
mod streams;
mod supply;

use std::sync::Arc;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{ActionSet, InventoryState, LoggedDataset, LoggedTuple, Trajectory, UserPopulation};
use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::reward::RewardModel;

pub use export::{trajectory_csv_string, write_trajectory_csv, TRAJECTORY_CSV_HEADER};
pub use streams::{derive_seed, ArrivalMode, EpisodeStreams};
pub use supply::{initial_supply, SupplyScheme};

/// Episodes per parallel work unit. Aggregation happens per chunk and then
/// across chunks in index order, so results do not depend on thread count.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardNoise {
    #[default]
    Normal,
    /// Normal conditioned on `r >= 0`.
    TruncatedNormal,
}

#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    population: UserPopulation,
    actions: ActionSet,
    model: Arc<RewardModel>,
    horizon: usize,
    initial_supply: InventoryState,
    reward_sigma: f64,
    reward_noise: RewardNoise,
    arrival: ArrivalMode,
    arrival_dist: WeightedIndex<f64>,
}

impl EnvironmentSpec {
    pub fn new(
        population: UserPopulation,
        model: Arc<RewardModel>,
        initial_supply: InventoryState,
        horizon: usize,
    ) -> Result<Self> {
        if model.users() != population.len() {
            return Err(Error::ShapeMismatch {
                expected: (population.len(), model.actions()),
                found: (model.users(), model.actions()),
            });
        }
        if initial_supply.len() != model.actions() {
            return Err(Error::invalid(
                "initial_supply",
                format!("expected {} entries, found {}", model.actions(), initial_supply.len()),
            ));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        let arrival_dist = WeightedIndex::new(population.weights().iter().copied())
            .map_err(|e| Error::invalid("weights", e.to_string()))?;
        Ok(Self {
            actions: ActionSet::new(model.actions())?,
            population,
            model,
            horizon,
            initial_supply,
            reward_sigma: 0.0,
            reward_noise: RewardNoise::Normal,
            arrival: ArrivalMode::Iid,
            arrival_dist,
        })
    }

    pub fn with_reward_noise(mut self, noise: RewardNoise, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("reward_sigma", format!("{sigma} must be finite and >= 0")));
        }
        self.reward_noise = noise;
        self.reward_sigma = sigma;
        Ok(self)
    }

    pub fn with_arrival(mut self, arrival: ArrivalMode) -> Result<Self> {
        if let ArrivalMode::Scripted(seq) = &arrival {
            if seq.is_empty() || seq.iter().any(|&u| u >= self.population.len()) {
                return Err(Error::invalid("arrival", "scripted users must be nonempty and in range"));
            }
        }
        self.arrival = arrival;
        Ok(self)
    }

    pub fn with_actions(mut self, actions: ActionSet) -> Result<Self> {
        if actions.len() != self.model.actions() {
            return Err(Error::invalid("actions", "label count does not match the model"));
        }
        self.actions = actions;
        Ok(self)
    }

    pub fn population(&self) -> &UserPopulation {
        &self.population
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn model(&self) -> &RewardModel {
        &self.model
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_supply(&self) -> &InventoryState {
        &self.initial_supply
    }

    pub fn arrival(&self) -> &ArrivalMode {
        &self.arrival
    }

    pub fn reward_sigma(&self) -> f64 {
        self.reward_sigma
    }

    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    pub fn streams(&self, seed: u64, episode: u64) -> EpisodeStreams {
        EpisodeStreams::new(&self.arrival, &self.arrival_dist, self.population.len(), seed, episode)
    }

    /// Maps a uniform in `(0, 1)` to a reward with mean parameter `mean`.
    fn reward_from_uniform(&self, mean: f64, u: f64) -> f64 {
        if self.reward_sigma == 0.0 {
            return mean;
        }
        let std = Normal::standard();
        match self.reward_noise {
            RewardNoise::Normal => mean + self.reward_sigma * std.inverse_cdf(u),
            RewardNoise::TruncatedNormal => {
                // mirrored: W = -(r - mean) / sigma is standard normal truncated to W <= mean / sigma
                let upper = std.cdf(mean / self.reward_sigma);
                let w = std.inverse_cdf(u * upper);
                (mean - self.reward_sigma * w).max(0.0)
            }
        }
    }
}

/// What happened at one step; `t` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub user: usize,
    pub action: usize,
    pub consumed: bool,
    pub reward: f64,
}

impl StepRecord {
    pub fn value(&self) -> f64 {
        if self.consumed {
            self.reward
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub realized_value: f64,
    pub steps: usize,
    pub final_stock: InventoryState,
}

/// Runs one episode, reporting each step together with the stock at
/// decision time.
pub fn simulate_episode(
    env: &EnvironmentSpec,
    policy: &Policy,
    streams: &mut EpisodeStreams,
    mut observe: impl FnMut(&StepRecord, &InventoryState),
) -> Result<EpisodeSummary> {
    let mut stock = env.initial_supply.clone();
    let q_c = env.model.q_c();
    let q_r = env.model.q_r();
    let mut realized_value = 0.0;
    let mut steps = 0;
    for t in 1..=env.horizon {
        if !stock.any_available() {
            break;
        }
        let user = streams.arrivals.next_user();
        // both uniforms are drawn every step so outcome streams stay aligned across policies
        let u_consume: f64 = streams.outcomes.random();
        let u_reward: f64 = streams.outcomes.sample(Open01);
        let action = policy.select(user, &stock, &mut streams.policy)?;
        let consumed = u_consume < q_c[[user, action]];
        let reward = env.reward_from_uniform(q_r[[user, action]], u_reward);
        let record = StepRecord { t, user, action, consumed, reward };
        observe(&record, &stock);
        stock.consume(action, consumed)?;
        realized_value += record.value();
        steps = t;
    }
    Ok(EpisodeSummary { realized_value, steps, final_stock: stock })
}

/// One episode with every tuple logged.
pub fn run_episode(env: &EnvironmentSpec, policy: &Policy, streams: &mut EpisodeStreams) -> Result<Trajectory> {
    let mut tuples = Vec::new();
    let summary = simulate_episode(env, policy, streams, |step, stock| {
        tuples.push(LoggedTuple {
            t: step.t,
            user: step.user,
            action: step.action,
            consumed: step.consumed,
            reward: step.reward,
            stock_before: stock.clone(),
        });
    })?;
    Ok(Trajectory { tuples, realized_value: summary.realized_value })
}

/// Logged dataset of `episodes` trajectories under `logging_policy`.
pub fn generate_logged_dataset(
    env: &EnvironmentSpec,
    logging_policy: &Policy,
    episodes: usize,
    seed: u64,
) -> Result<LoggedDataset> {
    let trajectories = (0..episodes as u64)
        .map(|ep| run_episode(env, logging_policy, &mut env.streams(seed, ep)))
        .collect::<Result<_>>()?;
    Ok(LoggedDataset { trajectories })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_sims: usize,
    /// Mean cumulative value after each step `t = 1..=horizon`.
    pub per_timestep_cumulative: Vec<f64>,
}

/// Mean share of each action's initial stock consumed by each user after
/// `t` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSnapshot {
    pub t: usize,
    pub shares: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: ValueEstimate,
    pub allocation: Vec<AllocationSnapshot>,
    /// Mean units left in stock when episodes end.
    pub mean_unsold_units: f64,
    /// Fraction of episodes that ended with every action sold out.
    pub depleted_fraction: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Steps after which allocation shares are recorded.
    pub allocation_checkpoints: Vec<usize>,
}

struct ChunkTotals {
    values: Vec<f64>,
    per_step: Vec<f64>,
    allocation: Vec<Array2<f64>>,
    unsold: f64,
    depleted: usize,
}

fn run_chunk(
    env: &EnvironmentSpec,
    policy: &Policy,
    episodes: std::ops::Range<usize>,
    seed: u64,
    options: &EvalOptions,
) -> Result<ChunkTotals> {
    let (users, actions) = (env.population.len(), env.model.actions());
    let checkpoints = &options.allocation_checkpoints;
    let mut totals = ChunkTotals {
        values: Vec::with_capacity(episodes.len()),
        per_step: vec![0.0; env.horizon],
        allocation: vec![Array2::zeros((users, actions)); checkpoints.len()],
        unsold: 0.0,
        depleted: 0,
    };
    let mut counts = Array2::<f64>::zeros((users, actions));
    for ep in episodes {
        let mut streams = env.streams(seed, ep as u64);
        counts.fill(0.0);
        let mut next_checkpoint = 0;
        let per_step = &mut totals.per_step;
        let allocation = &mut totals.allocation;
        let summary = simulate_episode(env, policy, &mut streams, |step, _| {
            per_step[step.t - 1] += step.value();
            if checkpoints.is_empty() {
                return;
            }
            if step.consumed {
                counts[[step.user, step.action]] += 1.0;
            }
            while next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == step.t {
                allocation[next_checkpoint] += &counts;
                next_checkpoint += 1;
            }
        })?;
        // episodes that stop early keep their final allocation for later checkpoints
        for snapshot in &mut totals.allocation[next_checkpoint..] {
            *snapshot += &counts;
        }
        totals.values.push(summary.realized_value);
        totals.unsold += summary.final_stock.total() as f64;
        if !summary.final_stock.any_available() {
            totals.depleted += 1;
        }
    }
    Ok(totals)
}

/// Monte Carlo evaluation over `n_sims` episodes seeded from `seed`.
pub fn evaluate_policy(
    env: &EnvironmentSpec,
    policy: &Policy,
    n_sims: usize,
    seed: u64,
    options: &EvalOptions,
) -> Result<Evaluation> {
    if n_sims == 0 {
        return Err(Error::invalid("n_sims", "must be at least 1"));
    }
    let mut checkpoints = options.allocation_checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.contains(&0) {
        return Err(Error::invalid("checkpoints", "checkpoints count steps from 1"));
    }
    let options = EvalOptions { allocation_checkpoints: checkpoints };
    let chunks: Vec<ChunkTotals> = (0..n_sims.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| run_chunk(env, policy, c * CHUNK..((c + 1) * CHUNK).min(n_sims), seed, &options))
        .collect::<Result<_>>()?;

    let n = n_sims as f64;
    let values: Vec<f64> = chunks.iter().flat_map(|c| c.values.iter().copied()).collect();
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if n_sims > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let mut per_step = vec![0.0; env.horizon];
    let mut allocation: Vec<Array2<f64>> =
        vec![Array2::zeros((env.population.len(), env.model.actions())); options.allocation_checkpoints.len()];
    let mut unsold = 0.0;
    let mut depleted = 0;
    for chunk in &chunks {
        for (acc, v) in per_step.iter_mut().zip(&chunk.per_step) {
            *acc += v;
        }
        for (acc, a) in allocation.iter_mut().zip(&chunk.allocation) {
            *acc += a;
        }
        unsold += chunk.unsold;
        depleted += chunk.depleted;
    }
    let mut running = 0.0;
    let per_timestep_cumulative = per_step
        .iter()
        .map(|s| {
            running += s / n;
            running
        })
        .collect();
    let initial = env.initial_supply.stock();
    let allocation = options
        .allocation_checkpoints
        .iter()
        .zip(allocation)
        .map(|(&t, counts)| {
            let shares = Array2::from_shape_fn(counts.dim(), |(j, a)| {
                if initial[a] == 0 {
                    0.0
                } else {
                    counts[[j, a]] / (n * f64::from(initial[a]))
                }
            });
            AllocationSnapshot { t, shares }
        })
        .collect();
    Ok(Evaluation {
        value: ValueEstimate { mean, std_error, n_sims, per_timestep_cumulative },
        allocation,
        mean_unsold_units: unsold / n,
        depleted_fraction: depleted as f64 / n,
    })
}

pub fn estimate_policy_value(
    env: &EnvironmentSpec,
    policy: &Policy,
    n_sims: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    Ok(evaluate_policy(env, policy, n_sims, seed, &EvalOptions::default())?.value)
}

/// Two policies evaluated on common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub candidate: ValueEstimate,
    pub baseline: ValueEstimate,
    /// `candidate.mean / baseline.mean`
    pub ratio: f64,
}

pub fn compare_policies(
    env: &EnvironmentSpec,
    candidate: &Policy,
    baseline: &Policy,
    n_sims: usize,
    seed: u64,
) -> Result<PairedComparison> {
    let candidate = estimate_policy_value(env, candidate, n_sims, seed)?;
    let baseline = estimate_policy_value(env, baseline, n_sims, seed)?;
    if baseline.mean.is_nan() || baseline.mean <= 0.0 {
        return Err(Error::NonPositiveBaseline(baseline.mean));
    }
    let ratio = candidate.mean / baseline.mean;
    Ok(PairedComparison { candidate, baseline, ratio })
}

/// `V(candidate) / V(baseline)` on common random numbers.
pub fn relative_policy_value(
    env: &EnvironmentSpec,
    candidate: &Policy,
    baseline: &Policy,
    n_sims: usize,
    seed: u64,
) -> Result<f64> {
    Ok(compare_policies(env, candidate, baseline, n_sims, seed)?.ratio)
}
