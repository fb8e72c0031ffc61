//! Maximum-weight bipartite assignment (Kuhn-Munkres with row potentials).

/// Assignment maximizing total similarity over `min(rows, cols)` pairs.
/// Returned pairs are `(row, col)` sorted by row.
pub fn max_weight_assignment(similarity: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = similarity.len();
    let cols = similarity.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(similarity.iter().all(|r| r.len() == cols), "ragged similarity matrix");
    if rows <= cols {
        solve(rows, cols, |i, j| -similarity[i][j])
    } else {
        let mut pairs: Vec<(usize, usize)> =
            solve(cols, rows, |i, j| -similarity[j][i]).into_iter().map(|(c, r)| (r, c)).collect();
        pairs.sort_unstable();
        pairs
    }
}

/// Maximum-similarity matching with weak pairs (`< threshold`) dropped afterwards.
pub fn hungarian_match(similarity: &[Vec<f64>], threshold: f64) -> Vec<(usize, usize)> {
    max_weight_assignment(similarity)
        .into_iter()
        .filter(|&(r, c)| similarity[r][c] >= threshold)
        .collect()
}

/// Minimum-cost assignment of every row (`n <= m`) to a distinct column.
fn solve(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
    let mut pairs: Vec<(usize, usize)> =
        (1..=m).filter(|&j| owner[j] != 0).map(|j| (owner[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}
