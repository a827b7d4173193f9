//! Relative value of the relative-gap policy over greedy as the shared
//! preference component fades out. Pass a seed count to trade time for
//! precision.

use limited_supply::experiment::{parse_config, run_cells, RunOptions};

const CONFIG: &str = r#"
[environment]
supply = "inverse_proportional"

[sweep]
parameter = "lambda"
values = [0.0, 0.25, 0.5, 0.75, 1.0]
"#;

fn main() -> limited_supply::Result<()> {
    let mut config = parse_config(CONFIG).map_err(limited_supply::Error::Config)?;
    config.seeds.count = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cells = run_cells(&config, &RunOptions::default())?;
    println!("{:>6} {:>8} {:>8} {:>8}", "lambda", "mean", "min", "max");
    for chunk in cells.chunk_by(|a, b| a.sweep_value == b.sweep_value) {
        let rel: Vec<f64> = chunk.iter().filter_map(|c| c.policies[1].relative_to_greedy).collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        let (min, max) = rel.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        println!("{:>6} {mean:>8.4} {min:>8.4} {max:>8.4}", chunk[0].sweep_value.unwrap());
    }
    Ok(())
}
