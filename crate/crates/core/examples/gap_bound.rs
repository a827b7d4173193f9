//! Closed-form greedy value and the lower bound on the optimality gap for a
//! random unit-supply instance whose users agree on a preference order.

use limited_supply::oracle::*;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> limited_supply::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1));
    let n = 5;
    let mut q = Array2::from_shape_simple_fn((n, n), || rng.random::<f64>());
    for mut row in q.rows_mut() {
        let mut v = row.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        row.assign(&Array1::from(v));
    }
    let inst = UnitSupplyInstance::uniform(q)?;

    let greedy = enumerate_greedy_value(&inst)?;
    let optimum = assignment_optimal_value(&inst)?.value;
    println!("greedy: closed form {:.6}, enumerated {greedy:.6}", greedy_value_closed_form(&inst)?);
    println!("optimum {optimum:.6}, gap {:.6}", optimum - greedy);
    println!("bound per (user, rank):");
    let mut best = (0.0, 0, 0);
    for j in 0..n {
        let row: Vec<String> = (0..n)
            .map(|k| {
                let b = greedy_gap_lower_bound(&inst, j, k).unwrap();
                if b > best.0 {
                    best = (b, j, k);
                }
                format!("{b:+.4}")
            })
            .collect();
        println!("  x{} {}", j + 1, row.join(" "));
    }
    let (b, j, k) = best;
    println!("tightest: x{} takes rank {} first, bound {b:.6} <= gap {:.6}", j + 1, k + 1, optimum - greedy);
    println!(
        "  iid value {:.6} = closed form {:.6}",
        iid_modified_policy_value(&inst, j, k)?,
        modified_policy_value(&inst, j, k)?
    );
    Ok(())
}
