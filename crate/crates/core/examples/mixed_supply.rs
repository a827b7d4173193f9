//! A fixed horizon with growing supply: once some items can no longer sell
//! out, the mixed policy scores only the scarce ones relatively.

use limited_supply::experiment::{parse_config, run_cells, RunOptions};

const CONFIG: &str = r#"
[environment]
supply = "inverse_proportional"
horizon = 2500

[[policies]]
kind = "greedy"

[[policies]]
kind = "opls"

[[policies]]
kind = "opls_mixed"

[sweep]
parameter = "s_max"
values = [5, 10, 20, 30, 50]

[seeds]
count = 20
"#;

fn main() -> limited_supply::Result<()> {
    let config = parse_config(CONFIG).map_err(limited_supply::Error::Config)?;
    let cells = run_cells(&config, &RunOptions::default())?;
    println!("{:>6} {:>8} {:>8} {:>11} {:>8}", "s_max", "stock", "opls", "opls_mixed", "unsold");
    for chunk in cells.chunk_by(|a, b| a.sweep_value == b.sweep_value) {
        let n = chunk.len() as f64;
        let mean = |i: usize| chunk.iter().filter_map(|c| c.policies[i].relative_to_greedy).sum::<f64>() / n;
        let stock = chunk.iter().map(|c| c.initial_stock as f64).sum::<f64>() / n;
        let unsold = chunk.iter().map(|c| c.greedy.mean_unsold_units).sum::<f64>() / n;
        println!("{:>6} {stock:>8.0} {:>8.4} {:>11.4} {unsold:>8.1}", chunk[0].sweep_value.unwrap(), mean(1), mean(2));
    }
    Ok(())
}
