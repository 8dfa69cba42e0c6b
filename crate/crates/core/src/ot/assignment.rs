//! Square assignment by shortest augmenting paths with dual potentials,
//! followed by a lexicographic refinement over the tight-edge subgraph.

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Solves the balanced assignment problem exactly.
///
/// Returns the permutation minimizing `sum_i cost[i][perm[i]] / m`. Among
/// optimal permutations the lexicographically smallest one is returned, where
/// "optimal" means every matched edge has zero reduced cost under the final
/// dual potentials (up to a tolerance scaled by the largest entry).
pub fn solve_assignment(cost: &CostMatrix) -> Result<TransportPlan> {
    let (rows, cols) = (cost.rows(), cost.cols());
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    let (mut perm, u, v) = shortest_augmenting_path(cost);
    let tol = 1e-12 * cost.max_entry().max(1.0) * rows as f64;
    lexicographic_refine(cost, &u, &v, tol, &mut perm);
    Ok(TransportPlan::from_assignment(perm, cost))
}

/// O(m^3) Hungarian method in its shortest-augmenting-path form.
///
/// Returns `(perm, u, v)` with `cost[i][j] - u[i] - v[j] >= 0` (up to
/// rounding) and equality on matched edges.
fn shortest_augmenting_path(cost: &CostMatrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.rows();
    // 1-based with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = cost.row(i0 - 1);
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
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

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    (perm, u[1..].to_vec(), v[1..].to_vec())
}

/// Moves each row, in order, to the smallest tight column that still admits a
/// perfect tight matching with all earlier rows fixed.
///
/// Any perfect matching inside the tight subgraph is optimal, so this keeps
/// the cost while making the output independent of solver internals.
fn lexicographic_refine(cost: &CostMatrix, u: &[f64], v: &[f64], tol: f64, perm: &mut [usize]) {
    let n = perm.len();
    let tight = |i: usize, j: usize| cost.get(i, j) - u[i] - v[j] <= tol;
    let mut row_of_col = vec![0usize; n];
    for (i, &j) in perm.iter().enumerate() {
        row_of_col[j] = i;
    }

    let mut found_by = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = Vec::with_capacity(n);

    for i in 0..n {
        let target = perm[i];
        for j in 0..target {
            let r = row_of_col[j];
            if r < i || !tight(i, j) {
                continue;
            }
            // Search an alternating path from r to `target` through rows > i.
            seen.fill(false);
            seen[j] = true;
            queue.clear();
            queue.push(r);
            let mut head = 0;
            let mut reached = false;
            'bfs: while head < queue.len() {
                let q = queue[head];
                head += 1;
                for c in 0..n {
                    if seen[c] || !tight(q, c) {
                        continue;
                    }
                    seen[c] = true;
                    found_by[c] = q;
                    if c == target {
                        reached = true;
                        break 'bfs;
                    }
                    let owner = row_of_col[c];
                    if owner > i {
                        queue.push(owner);
                    }
                }
            }
            if !reached {
                continue;
            }
            let mut c = target;
            loop {
                let q = found_by[c];
                let old = perm[q];
                perm[q] = c;
                row_of_col[c] = q;
                if q == r {
                    break;
                }
                c = old;
            }
            perm[i] = j;
            row_of_col[j] = i;
            break;
        }
    }
}
