//! Runs one logged episode on the coupon market and writes it as CSV.

use std::sync::Arc;

use limited_supply::sim::{run_episode, trajectory_csv_string, ArrivalMode};
use limited_supply::{EnvironmentSpec, InventoryState, Policy, RewardEstimate, RewardModel, UserPopulation};
use ndarray::array;

fn main() -> limited_supply::Result<()> {
    let model = Arc::new(RewardModel::always_consumed(array![
        [80.0, 250.0, 200.0],
        [100.0, 280.0, 120.0],
        [60.0, 100.0, 70.0],
    ])?);
    let population = UserPopulation::anonymous(3)?;
    let env = EnvironmentSpec::new(population, model.clone(), InventoryState::new(vec![2, 2, 2]), 6)?
        .with_arrival(ArrivalMode::Permutation)?;
    let policy = Policy::softmax_logging(Arc::new(RewardEstimate::exact(&model)), env.population(), 0.02)?;
    let trajectory = run_episode(&env, &policy, &mut env.streams(7, 0))?;
    trajectory.check_conservation(env.initial_supply())?;
    print!("{}", trajectory_csv_string(&trajectory)?);
    if let Some(path) = std::env::args().nth(1) {
        trajectory.write_csv(&path)?;
        eprintln!("wrote {path}");
    }
    Ok(())
}
