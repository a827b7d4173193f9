//! The built-in three-user demo: cumulative value per step and how much of
//! the top action each user receives.

use limited_supply::experiment::{run_cells, small_scale_config, RunOptions};

fn main() -> limited_supply::Result<()> {
    let config = small_scale_config();
    let cells = run_cells(&config, &RunOptions::default())?;
    let n = cells.len() as f64;
    let names: Vec<String> = cells[0].policies.iter().map(|p| p.name.clone()).collect();

    println!("{:>4} {}", "t", names.iter().map(|s| format!("{s:>10}")).collect::<String>());
    for t in [1, 5, 10, 30, 60, 100] {
        let means: String = (0..names.len())
            .map(|i| {
                let m: f64 = cells
                    .iter()
                    .map(|c| c.policies[i].evaluation.as_ref().unwrap().value.per_timestep_cumulative[t - 1])
                    .sum::<f64>()
                    / n;
                format!("{m:>10.3}")
            })
            .collect();
        println!("{t:>4} {means}");
    }

    let top = 4;
    for (i, name) in names.iter().enumerate() {
        println!("{name}: share of a5 by user at t = 10, 30, 60");
        for user in 0..3 {
            let shares: String = (0..3)
                .map(|k| {
                    let s: f64 = cells
                        .iter()
                        .map(|c| c.policies[i].evaluation.as_ref().unwrap().allocation[k].shares[[user, top]])
                        .sum::<f64>()
                        / n;
                    format!("{s:>7.3}")
                })
                .collect();
            println!("  x{} {shares}", user + 1);
        }
    }
    Ok(())
}
