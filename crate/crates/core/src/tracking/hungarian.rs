//! Minimum-cost one-to-one assignment (Hungarian algorithm, O(n^3)
//! potentials formulation with shortest augmenting paths).

/// Sentinel used in place of infinite costs; anything at or above this
/// is treated as forbidden by the gating step.
pub const FORBIDDEN_COST: f64 = 1e9;

/// Solve the rectangular assignment problem for `rows <= cols`.
/// Returns `assign[row] = col` minimizing the total cost.
fn solve_rows_le_cols(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    debug_assert!(n <= m);
    let inf = f64::INFINITY;
    // 1-indexed potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Minimum-cost assignment on an arbitrary rectangular matrix.
/// Returns `assign[row] = Some(col)`; rows left out of the optimal
/// matching (only possible when rows > cols) get `None`.
/// Non-finite entries are capped at [`FORBIDDEN_COST`].
pub fn solve(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return vec![None; rows];
    }
    let capped: Vec<Vec<f64>> = cost
        .iter()
        .map(|r| {
            r.iter()
                .map(|&c| if c.is_finite() { c.min(FORBIDDEN_COST) } else { FORBIDDEN_COST })
                .collect()
        })
        .collect();
    if rows <= cols {
        solve_rows_le_cols(&capped)
            .into_iter()
            .map(Some)
            .collect()
    } else {
        // Transpose, solve, invert the mapping.
        let t: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| capped[i][j]).collect())
            .collect();
        let col_to_row = solve_rows_le_cols(&t);
        let mut assign = vec![None; rows];
        for (j, &i) in col_to_row.iter().enumerate() {
            assign[i] = Some(j);
        }
        assign
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: every maximum-cardinality injective
    /// row-to-column map (exactly `rows - cols` rows skipped when the
    /// matrix is tall).
    pub fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, skips_left: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost[0].len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, skips_left, used));
                    used[j] = false;
                }
            }
            if skips_left > 0 {
                best = best.min(rec(cost, row + 1, skips_left - 1, used));
            }
            best
        }
        let skips = cost.len().saturating_sub(cost[0].len());
        let mut used = vec![false; cost[0].len()];
        rec(cost, 0, skips, &mut used)
    }

    fn total(cost: &[Vec<f64>], assign: &[Option<usize>]) -> f64 {
        assign
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| cost[i][j]))
            .sum()
    }

    #[test]
    fn two_by_two_example() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let assign = solve(&cost);
        assert_eq!(assign, vec![Some(1), Some(0)]);
        assert_eq!(total(&cost, &assign), 4.0);
    }

    #[test]
    fn diagonal_dominant() {
        let cost = vec![
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        assert_eq!(solve(&cost), vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn empty_and_degenerate_shapes() {
        assert!(solve(&[]).is_empty());
        let no_cols: Vec<Vec<f64>> = vec![vec![], vec![]];
        assert_eq!(solve(&no_cols), vec![None, None]);
    }

    #[test]
    fn matches_brute_force_on_random_square_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=6);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let assign = solve(&cost);
            let got = total(&cost, &assign);
            let want = brute_force(&cost);
            assert!((got - want).abs() < 1e-9, "{got} != {want} for {cost:?}");
        }
    }

    #[test]
    fn matches_brute_force_on_rectangular_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..300 {
            let r = rng.gen_range(1..=5);
            let c = rng.gen_range(r..=6);
            let cost: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..c).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let assign = solve(&cost);
            let got = total(&cost, &assign);
            let want = brute_force(&cost);
            assert!((got - want).abs() < 1e-9);
        }
    }
}
