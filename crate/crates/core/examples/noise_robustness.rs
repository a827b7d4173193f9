//! Both policies act on the same noisy estimate of the expected reward.

use limited_supply::experiment::{parse_config, run_cells, RunOptions};

const CONFIG: &str = r#"
[estimator]
kind = "noise"
sigma = 0.0

[sweep]
parameter = "estimator_sigma"
values = [0.0, 0.5, 1.0, 2.0, 3.0]

[seeds]
count = 30
"#;

fn main() -> limited_supply::Result<()> {
    let config = parse_config(CONFIG).map_err(limited_supply::Error::Config)?;
    let cells = run_cells(&config, &RunOptions::default())?;
    println!("{:>6} {:>8} {:>8}", "sigma", "mean", "se");
    for chunk in cells.chunk_by(|a, b| a.sweep_value == b.sweep_value) {
        let rel: Vec<f64> = chunk.iter().filter_map(|c| c.policies[1].relative_to_greedy).collect();
        let n = rel.len() as f64;
        let mean = rel.iter().sum::<f64>() / n;
        let se = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        println!("{:>6} {mean:>8.4} {se:>8.4}", chunk[0].sweep_value.unwrap());
    }
    Ok(())
}
