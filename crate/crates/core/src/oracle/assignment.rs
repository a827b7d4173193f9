//! Maximum-weight assignment via the Hungarian method with potentials,
//! `O(n^2 m)` for `n` rows and `m >= n` columns.

use ndarray::Array2;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub value: f64,
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
}

/// Maximizes `sum_i weights[i, row_to_col[i]]` over injective row-to-column
/// maps. Requires `rows <= cols`.
pub fn max_weight_assignment(weights: &Array2<f64>) -> Assignment {
    let (n, m) = weights.dim();
    assert!(n <= m, "assignment needs at least as many columns as rows");
    if n == 0 {
        return Assignment { value: 0.0, row_to_col: Vec::new() };
    }
    // minimize negated weights; 1-based with a dummy column 0
    let cost = |i: usize, j: usize| -weights[[i - 1, j - 1]];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    let value = row_to_col.iter().enumerate().map(|(i, &j)| weights[[i, j]]).sum();
    Assignment { value, row_to_col }
}
