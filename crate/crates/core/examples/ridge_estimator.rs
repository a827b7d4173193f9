//! Fits the expected reward from data logged by a softmax policy, then
//! compares policies built on the fit against the same policies built on
//! the truth.

use std::sync::Arc;

use limited_supply::reward::{
    mixed_model, ridge_fit, sorted_baseline_g, synth_feature_reward, FeatureRewardKind, RidgeTarget,
};
use limited_supply::sim::{generate_logged_dataset, initial_supply, relative_policy_value, RewardNoise, SupplyScheme};
use limited_supply::{EnvironmentSpec, Policy, RewardEstimate, UserPopulation};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> limited_supply::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (users, actions, dim) = (100, 40, 5);
    let population = UserPopulation::uniform(Array2::from_shape_simple_fn((users, dim), || {
        rand::Rng::sample(&mut rng, StandardNormal)
    }))?;
    let f_c = synth_feature_reward(&population, actions, &mut rng, FeatureRewardKind::Logistic);
    let f_r = synth_feature_reward(&population, actions, &mut rng, FeatureRewardKind::Linear);
    let g_c = sorted_baseline_g(&mut rng, users, actions, 1.0);
    let g_r = sorted_baseline_g(&mut rng, users, actions, f_r.iter().copied().fold(0.0, f64::max));
    let model = Arc::new(mixed_model(&f_c, &g_c, &f_r, &g_r, 0.5)?);
    let stock = initial_supply(SupplyScheme::InverseProportional, 20, &model, &population, &mut rng)?;
    let horizon = 10 * stock.total() as usize;
    let env =
        EnvironmentSpec::new(population, model.clone(), stock, horizon)?.with_reward_noise(RewardNoise::Normal, 1.0)?;

    let truth = Arc::new(RewardEstimate::exact(&model));
    let logging = Policy::softmax_logging(truth.clone(), env.population(), -1.0)?;
    for episodes in [1, 5, 25] {
        let log = generate_logged_dataset(&env, &logging, episodes, 9)?;
        let fit = Arc::new(ridge_fit(&log, env.population(), actions, 1.0, RidgeTarget::ProductCr)?);
        let err = (fit.q_hat() - model.q()).mapv(f64::abs).mean().unwrap_or(0.0);
        let opls = Policy::opls(fit.clone(), env.population(), 1.0)?;
        let greedy = Policy::greedy(fit, env.population())?;
        let vs_greedy = relative_policy_value(&env, &opls, &greedy, 50, 3)?;
        let vs_oracle =
            relative_policy_value(&env, &opls, &Policy::opls(truth.clone(), env.population(), 1.0)?, 50, 3)?;
        println!(
            "{episodes:>3} logged episodes ({:>6} tuples): mean abs error {err:.3}, opls/greedy {vs_greedy:.4}, fitted/true opls {vs_oracle:.4}",
            log.len()
        );
    }
    Ok(())
}
