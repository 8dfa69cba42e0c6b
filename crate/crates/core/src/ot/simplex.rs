//! Transportation simplex for the uniform-marginal Kantorovich problem.
//!
//! Masses are scaled to integers (each row supplies `m1`, each column demands
//! `m0`) and then perturbed so that no basic solution is degenerate: every
//! supply gains `1` and the last demand gains `m0`, with the integer part
//! scaled by `K = m0 + 1`. Every pivot then strictly decreases the objective,
//! so the method terminates under any entering rule. The optimal basis of the
//! perturbed problem is optimal and feasible for the original one; the final
//! flows are recovered by solving that spanning tree with unperturbed masses.

use super::{CostMatrix, Coupling, TransportPlan};
use crate::error::{Error, Result};

/// Exact optimal coupling with marginals `1/m0` (rows) and `1/m1` (columns).
pub fn solve_kantorovich(cost: &CostMatrix) -> Result<TransportPlan> {
    let (m0, m1) = (cost.rows(), cost.cols());
    if m0 == 0 || m1 == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    let basis = optimal_basis(cost);
    let flows = tree_flows(m0, m1, &basis);
    let scale = (m0 * m1) as f64;
    let mut weights = vec![0.0; m0 * m1];
    for (&(i, j), &f) in basis.iter().zip(&flows) {
        weights[i * m1 + j] = f as f64 / scale;
    }
    Ok(TransportPlan::from_coupling(
        Coupling {
            rows: m0,
            cols: m1,
            weights,
        },
        cost,
    ))
}

/// Runs the perturbed simplex and returns the `m0 + m1 - 1` basic cells.
fn optimal_basis(cost: &CostMatrix) -> Vec<(usize, usize)> {
    let (m0, m1) = (cost.rows(), cost.cols());
    let k = (m0 + 1) as i64;
    let mut supply: Vec<i64> = vec![m1 as i64 * k + 1; m0];
    let mut demand: Vec<i64> = vec![m0 as i64 * k; m1];
    demand[m1 - 1] += m0 as i64;

    // North-west corner start; nondegenerate by construction.
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m0 + m1 - 1);
    let mut flow: Vec<i64> = Vec::with_capacity(m0 + m1 - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let f = supply[i].min(demand[j]);
        cells.push((i, j));
        flow.push(f);
        supply[i] -= f;
        demand[j] -= f;
        if i == m0 - 1 && j == m1 - 1 {
            break;
        }
        if supply[i] == 0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(cells.len(), m0 + m1 - 1);

    let n_nodes = m0 + m1;
    let tol = 1e-12 * cost.max_entry().max(1.0);
    let mut is_basic = vec![false; m0 * m1];
    for &(i, j) in &cells {
        is_basic[i * m1 + j] = true;
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_nodes];
    let mut potential = vec![0.0f64; n_nodes];
    let mut visited = vec![false; n_nodes];
    let mut parent = vec![(usize::MAX, usize::MAX); n_nodes];
    let mut stack = Vec::with_capacity(n_nodes);

    loop {
        // Node ids: rows 0..m0, columns m0..m0+m1. Edge payload = basis slot.
        for a in adj.iter_mut() {
            a.clear();
        }
        for (slot, &(i, j)) in cells.iter().enumerate() {
            adj[i].push((m0 + j, slot));
            adj[m0 + j].push((i, slot));
        }

        // Potentials u_i + v_j = c_ij on the tree, rooted at row 0.
        visited.fill(false);
        potential[0] = 0.0;
        visited[0] = true;
        stack.clear();
        stack.push(0);
        while let Some(node) = stack.pop() {
            for &(next, slot) in &adj[node] {
                if visited[next] {
                    continue;
                }
                let (ci, cj) = cells[slot];
                potential[next] = cost.get(ci, cj) - potential[node];
                visited[next] = true;
                stack.push(next);
            }
        }

        // Dantzig pricing; ties go to the first cell in row-major order.
        let mut best = -tol;
        let mut entering = None;
        for i in 0..m0 {
            let ui = potential[i];
            let row = cost.row(i);
            for j in 0..m1 {
                if is_basic[i * m1 + j] {
                    continue;
                }
                let rc = row[j] - ui - potential[m0 + j];
                if rc < best {
                    best = rc;
                    entering = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        // Tree path from row ei to column ej.
        visited.fill(false);
        visited[ei] = true;
        stack.clear();
        stack.push(ei);
        let goal = m0 + ej;
        while let Some(node) = stack.pop() {
            if node == goal {
                break;
            }
            for &(next, slot) in &adj[node] {
                if !visited[next] {
                    visited[next] = true;
                    parent[next] = (node, slot);
                    stack.push(next);
                }
            }
        }
        let mut path_slots = Vec::new();
        let mut node = goal;
        while node != ei {
            let (prev, slot) = parent[node];
            path_slots.push(slot);
            node = prev;
        }
        // Walking back from the column, slots alternate -, +, -, ..., -.
        let mut theta = i64::MAX;
        let mut leaving = usize::MAX;
        for (k, &slot) in path_slots.iter().enumerate() {
            if k % 2 == 0 && flow[slot] < theta {
                theta = flow[slot];
                leaving = slot;
            }
        }
        debug_assert!(theta > 0, "perturbation must rule out degenerate pivots");
        for (k, &slot) in path_slots.iter().enumerate() {
            if k % 2 == 0 {
                flow[slot] -= theta;
            } else {
                flow[slot] += theta;
            }
        }
        let (li, lj) = cells[leaving];
        is_basic[li * m1 + lj] = false;
        is_basic[ei * m1 + ej] = true;
        cells[leaving] = (ei, ej);
        flow[leaving] = theta;
    }
    cells
}

/// Unperturbed flows on a spanning-tree basis, by leaf elimination.
fn tree_flows(m0: usize, m1: usize, cells: &[(usize, usize)]) -> Vec<i64> {
    let n_nodes = m0 + m1;
    let mut residual: Vec<i64> = (0..n_nodes)
        .map(|v| if v < m0 { m1 as i64 } else { m0 as i64 })
        .collect();
    let mut degree = vec![0usize; n_nodes];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (slot, &(i, j)) in cells.iter().enumerate() {
        adj[i].push(slot);
        adj[m0 + j].push(slot);
        degree[i] += 1;
        degree[m0 + j] += 1;
    }
    let mut flows = vec![0i64; cells.len()];
    let mut done = vec![false; cells.len()];
    let mut leaves: Vec<usize> = (0..n_nodes).filter(|&v| degree[v] == 1).collect();
    while let Some(leaf) = leaves.pop() {
        if degree[leaf] != 1 {
            continue;
        }
        let slot = *adj[leaf].iter().find(|&&s| !done[s]).expect("leaf has one live edge");
        let (i, j) = cells[slot];
        let other = if leaf == i { m0 + j } else { i };
        let f = residual[leaf];
        flows[slot] = f;
        done[slot] = true;
        residual[leaf] = 0;
        residual[other] -= f;
        degree[leaf] = 0;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    debug_assert!(flows.iter().all(|&f| f >= 0));
    flows
}
