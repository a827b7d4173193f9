//! Per-action ridge regression of logged outcomes on user features.
//!
//! The intercept is left unpenalized: features and targets are centred per
//! action, the slope solves `(Xc'Xc + penalty I) w = Xc'yc`, and the
//! intercept restores the means. A large penalty therefore collapses every
//! column to its per-action mean.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Provenance, RewardEstimate};
use crate::domain::{LoggedDataset, UserPopulation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeTarget {
    /// Regress the reward `r` (estimates `q_r`).
    RewardR,
    /// Regress the realized product `c * r` (estimates `q`).
    ProductCr,
}

pub fn ridge_fit(
    dataset: &LoggedDataset,
    population: &UserPopulation,
    actions: usize,
    penalty: f64,
    target: RidgeTarget,
) -> Result<RewardEstimate> {
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::invalid("penalty", format!("{penalty} must be finite and > 0")));
    }
    if dataset.is_empty() {
        return Err(Error::invalid("dataset", "cannot fit on an empty log"));
    }
    let features = population.features();
    let dim = features.ncols();

    let mut per_action: Vec<Vec<(usize, f64)>> = vec![Vec::new(); actions];
    let mut total = 0.0;
    for tuple in dataset.tuples() {
        if tuple.user >= population.len() {
            return Err(Error::UserOutOfRange { user: tuple.user, count: population.len() });
        }
        if tuple.action >= actions {
            return Err(Error::ActionOutOfRange { action: tuple.action, count: actions });
        }
        let y = match target {
            RidgeTarget::RewardR => tuple.reward,
            RidgeTarget::ProductCr => tuple.value(),
        };
        total += y;
        per_action[tuple.action].push((tuple.user, y));
    }
    let global_mean = total / dataset.len() as f64;

    let mut q_hat = Array2::from_elem((population.len(), actions), global_mean);
    for (a, obs) in per_action.iter().enumerate() {
        if obs.is_empty() {
            continue;
        }
        let n = obs.len() as f64;
        let mut x_mean = vec![0.0; dim];
        let mut y_mean = 0.0;
        for &(user, y) in obs {
            for (m, x) in x_mean.iter_mut().zip(features.row(user)) {
                *m += x / n;
            }
            y_mean += y / n;
        }
        let slope = if dim == 0 {
            DVector::zeros(0)
        } else {
            let mut gram = DMatrix::<f64>::identity(dim, dim) * penalty;
            let mut rhs = DVector::<f64>::zeros(dim);
            let mut centred = vec![0.0; dim];
            for &(user, y) in obs {
                for (c, (x, m)) in centred.iter_mut().zip(features.row(user).iter().zip(&x_mean)) {
                    *c = x - m;
                }
                for i in 0..dim {
                    rhs[i] += centred[i] * (y - y_mean);
                    for k in 0..dim {
                        gram[(i, k)] += centred[i] * centred[k];
                    }
                }
            }
            gram.cholesky().expect("penalized normal equations are positive definite").solve(&rhs)
        };
        let intercept = y_mean - slope.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
        for (j, row) in features.rows().into_iter().enumerate() {
            q_hat[[j, a]] = intercept + row.iter().zip(slope.iter()).map(|(x, w)| x * w).sum::<f64>();
        }
    }
    RewardEstimate::new(q_hat, Provenance::Ridge { penalty })
}
