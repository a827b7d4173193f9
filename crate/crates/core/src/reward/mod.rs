//! Expected-reward models and their estimates.
//!
//! A [`RewardModel`] holds the consumption probability `q_c(x, a)`, the
//! expected reward magnitude `q_r(x, a)` and their elementwise product
//! `q(x, a)`, all as `users x actions` matrices. Policies never see the
//! model directly; they act on a [`RewardEstimate`].

mod ridge;
mod synth;

use ndarray::{Array2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::UserPopulation;
use crate::error::{Error, Result};

pub use ridge::{ridge_fit, RidgeTarget};
pub use synth::{sorted_baseline_g, synth_feature_reward, FeatureRewardKind};

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    q_c: Array2<f64>,
    q_r: Array2<f64>,
    q: Array2<f64>,
}

impl RewardModel {
    pub fn new(q_c: Array2<f64>, q_r: Array2<f64>) -> Result<Self> {
        check_same_shape(&q_c, &q_r)?;
        if q_c.nrows() == 0 || q_c.ncols() == 0 {
            return Err(Error::invalid("reward model", "empty matrix"));
        }
        if q_c.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("q_c", "consumption probabilities must lie in [0, 1]"));
        }
        if q_r.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::invalid("q_r", "expected rewards must be finite and nonnegative"));
        }
        let q = &q_c * &q_r;
        Ok(Self { q_c, q_r, q })
    }

    /// Model in which every recommendation is consumed, so `q = q_r`.
    pub fn always_consumed(q: Array2<f64>) -> Result<Self> {
        Self::new(Array2::ones(q.raw_dim()), q)
    }

    pub fn users(&self) -> usize {
        self.q.nrows()
    }

    pub fn actions(&self) -> usize {
        self.q.ncols()
    }

    pub fn q_c(&self) -> &Array2<f64> {
        &self.q_c
    }

    pub fn q_r(&self) -> &Array2<f64> {
        &self.q_r
    }

    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }

    /// `E_p(x)[q(x, a)]` for every action.
    pub fn expected_by_action(&self, population: &UserPopulation) -> Vec<f64> {
        population.weighted_column_means(&self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Noise { sigma: f64 },
    Ridge { penalty: f64 },
}

/// Estimated `q_hat(x, a)` used by decision rules.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardEstimate {
    q_hat: Array2<f64>,
    provenance: Provenance,
}

impl RewardEstimate {
    pub fn new(q_hat: Array2<f64>, provenance: Provenance) -> Result<Self> {
        if q_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("q_hat", "estimates must be finite"));
        }
        Ok(Self { q_hat, provenance })
    }

    pub fn exact(model: &RewardModel) -> Self {
        Self { q_hat: model.q().clone(), provenance: Provenance::Exact }
    }

    pub fn q_hat(&self) -> &Array2<f64> {
        &self.q_hat
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn users(&self) -> usize {
        self.q_hat.nrows()
    }

    pub fn actions(&self) -> usize {
        self.q_hat.ncols()
    }
}

fn check_same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// `lambda * f + (1 - lambda) * g`, elementwise.
pub fn mix_components(f: &Array2<f64>, g: &Array2<f64>, lambda: f64) -> Result<Array2<f64>> {
    check_same_shape(f, g)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid("lambda", format!("{lambda} is outside [0, 1]")));
    }
    let mut out = Array2::zeros(f.raw_dim());
    Zip::from(&mut out).and(f).and(g).for_each(|o, &fv, &gv| *o = lambda * fv + (1.0 - lambda) * gv);
    Ok(out)
}

/// Mixes consumption and reward components and assembles the model.
/// The mixed consumption probabilities are clamped to `[0, 1]`.
pub fn mixed_model(
    f_c: &Array2<f64>,
    g_c: &Array2<f64>,
    f_r: &Array2<f64>,
    g_r: &Array2<f64>,
    lambda: f64,
) -> Result<RewardModel> {
    let q_c = mix_components(f_c, g_c, lambda)?.mapv(|p| p.clamp(0.0, 1.0));
    let q_r = mix_components(f_r, g_r, lambda)?;
    RewardModel::new(q_c, q_r)
}

/// `q_hat = q + N(0, sigma^2)`, iid per entry.
pub fn noisy_estimate<R: Rng + ?Sized>(model: &RewardModel, sigma: f64, rng: &mut R) -> Result<RewardEstimate> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("{sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return RewardEstimate::new(model.q().clone(), Provenance::Noise { sigma });
    }
    let q_hat = model.q().mapv(|v| {
        let z: f64 = rng.sample(StandardNormal);
        v + sigma * z
    });
    RewardEstimate::new(q_hat, Provenance::Noise { sigma })
}
