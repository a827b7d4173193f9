//! Loads a dense ratings matrix with user features, samples a sub-market and
//! simulates both policies on it with true rewards.

use std::path::Path;
use std::sync::Arc;

use limited_supply::ingest::load_interactions;
use limited_supply::sim::{compare_policies, initial_supply, RewardNoise, SupplyScheme};
use limited_supply::{EnvironmentSpec, Policy, RewardEstimate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> limited_supply::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample");
    let full = load_interactions(dir.join("ratings.csv"), dir.join("features.csv"))?;
    println!("loaded {} users x {} items, {} features", full.users(), full.items(), full.features().ncols());

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..5 {
        let data = full.subsample(30, 20, &mut rng)?;
        let model = Arc::new(data.to_reward_model()?);
        let population = data.population()?;
        let stock = initial_supply(SupplyScheme::InverseProportional, 5, &model, &population, &mut rng)?;
        let horizon = 10 * stock.total() as usize;
        let env = EnvironmentSpec::new(population, model.clone(), stock, horizon)?
            .with_reward_noise(RewardNoise::TruncatedNormal, 1.0)?;
        let truth = Arc::new(RewardEstimate::exact(&model));
        let opls = Policy::opls(truth.clone(), env.population(), 1.0)?;
        let greedy = Policy::greedy(truth, env.population())?;
        let cmp = compare_policies(&env, &opls, &greedy, 200, seed)?;
        println!(
            "sample {seed}: greedy {:.2} +- {:.2}, opls {:.2} +- {:.2}, ratio {:.4}",
            cmp.baseline.mean, cmp.baseline.std_error, cmp.candidate.mean, cmp.candidate.std_error, cmp.ratio
        );
    }
    Ok(())
}
