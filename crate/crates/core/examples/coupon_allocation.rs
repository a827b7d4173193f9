//! Three users, three coupons, one of each in stock: greedy against the
//! relative-gap policy and the best possible matching, over every arrival
//! order.

use limited_supply::oracle::{assignment_optimal_value, enumerate_orders, UnitSupplyInstance};
use ndarray::array;

fn main() -> limited_supply::Result<()> {
    let labels = ["30%OFF", "50%OFF", "70%OFF"];
    let inst = UnitSupplyInstance::uniform(array![[80.0, 250.0, 200.0], [100.0, 280.0, 120.0], [60.0, 100.0, 70.0],])?;

    for (name, policy) in [("greedy", inst.greedy_policy()?), ("opls", inst.opls_policy(1.0)?)] {
        println!("{name}");
        let outcomes = enumerate_orders(&inst, &policy)?;
        for o in &outcomes {
            let order: Vec<String> = o.order.iter().map(|u| format!("x{}", u + 1)).collect();
            let picks: Vec<&str> = o.allocation.iter().map(|&(_, a)| labels[a]).collect();
            println!("  {:<12} {:<24} {:>6}", order.join(","), picks.join(","), o.total);
        }
        let mean = outcomes.iter().map(|o| o.total).sum::<f64>() / outcomes.len() as f64;
        println!("  mean {mean}");
    }

    let best = assignment_optimal_value(&inst)?;
    println!("optimal matching, value {}", best.value);
    for (user, &action) in best.row_to_col.iter().enumerate() {
        println!("  x{} -> {}", user + 1, labels[action]);
    }
    Ok(())
}
