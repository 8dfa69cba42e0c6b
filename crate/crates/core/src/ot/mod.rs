//! Exact discrete optimal transport.
//!
//! Costs are dense row-major matrices (rows index group-0 points, columns
//! group-1 points). Two exact solvers are provided:
//!
//! - [`solve_assignment`] for square problems with uniform weights, where the
//!   optimal coupling is a scaled permutation;
//! - [`solve_kantorovich`] for arbitrary `m0 x m1` problems with uniform
//!   marginals `1/m0` and `1/m1`, via a transportation network simplex.
//!
//! [`construct_common_point_coupling`] builds the block coupling that pairs
//! equal scores first, which bounds the matched score gap by the total
//! variation between the two discrete score distributions.

mod assignment;
mod simplex;

pub use assignment::solve_assignment;
pub use simplex::solve_kantorovich;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense non-negative cost matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    alpha: f64,
}

impl CostMatrix {
    /// Builds a matrix from row vectors, validating shape and entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            entries.extend(row);
        }
        Self::from_entries(n_rows, n_cols, entries, 0.0)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::from_entries(rows, cols, entries, 0.0)
    }

    fn from_entries(rows: usize, cols: usize, entries: Vec<f64>, alpha: f64) -> Result<Self> {
        debug_assert_eq!(entries.len(), rows * cols);
        if let Some(pos) = entries.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidCost {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
                value: entries[pos],
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
            alpha,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Label-mismatch weight used at construction (0 for a pure input cost).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
            alpha: self.alpha,
        }
    }
}

/// Cost between two point sets: squared Euclidean distance plus
/// `alpha * |y_i - y_j|`.
///
/// Labels are required when `alpha > 0` and ignored otherwise.
pub fn build_cost_matrix<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    xs0: &[P],
    xs1: &[Q],
    labels: Option<(&[u8], &[u8])>,
    alpha: f64,
) -> Result<CostMatrix> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let dim = xs0
        .first()
        .map(|p| p.as_ref().len())
        .or_else(|| xs1.first().map(|p| p.as_ref().len()))
        .unwrap_or(0);
    for p in xs0.iter().map(AsRef::as_ref).chain(xs1.iter().map(AsRef::as_ref)) {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    let labels = if alpha > 0.0 {
        let (y0, y1) = labels.ok_or(Error::MissingLabels)?;
        if y0.len() != xs0.len() {
            return Err(Error::SizeMismatch {
                left: xs0.len(),
                right: y0.len(),
            });
        }
        if y1.len() != xs1.len() {
            return Err(Error::SizeMismatch {
                left: xs1.len(),
                right: y1.len(),
            });
        }
        Some((y0, y1))
    } else {
        None
    };

    let mut entries = Vec::with_capacity(xs0.len() * xs1.len());
    for (i, a) in xs0.iter().enumerate() {
        let a = a.as_ref();
        for (j, b) in xs1.iter().enumerate() {
            let mut c = squared_distance(a, b.as_ref());
            if let Some((y0, y1)) = labels {
                c += alpha * (f64::from(y0[i]) - f64::from(y1[j])).abs();
            }
            entries.push(c);
        }
    }
    CostMatrix::from_entries(xs0.len(), xs1.len(), entries, alpha)
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense coupling matrix with row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl Coupling {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.weights.chunks(self.cols.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (k, w) in self.weights.iter().enumerate() {
            sums[k % self.cols] += w;
        }
        sums
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanKind {
    /// `perm[i]` is the column matched to row `i`.
    Assignment(Vec<usize>),
    Coupling(Coupling),
}

/// A transport plan together with its cost and declared marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub kind: PlanKind,
    pub total_cost: f64,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
}

impl TransportPlan {
    pub(crate) fn from_assignment(perm: Vec<usize>, cost: &CostMatrix) -> Self {
        let m = perm.len();
        let total_cost = perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum::<f64>() / m as f64;
        Self {
            kind: PlanKind::Assignment(perm),
            total_cost,
            row_marginal: vec![1.0 / m as f64; m],
            col_marginal: vec![1.0 / m as f64; m],
        }
    }

    pub(crate) fn from_coupling(coupling: Coupling, cost: &CostMatrix) -> Self {
        let total_cost = coupling.weights.iter().zip(cost.entries()).map(|(w, c)| w * c).sum();
        Self {
            row_marginal: vec![1.0 / coupling.rows as f64; coupling.rows],
            col_marginal: vec![1.0 / coupling.cols as f64; coupling.cols],
            kind: PlanKind::Coupling(coupling),
            total_cost,
        }
    }

    pub fn assignment(&self) -> Option<&[usize]> {
        match &self.kind {
            PlanKind::Assignment(p) => Some(p),
            PlanKind::Coupling(_) => None,
        }
    }

    pub fn coupling(&self) -> Option<&Coupling> {
        match &self.kind {
            PlanKind::Coupling(c) => Some(c),
            PlanKind::Assignment(_) => None,
        }
    }

    /// Support of the plan as `(row, col, weight)` triples.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        match &self.kind {
            PlanKind::Assignment(perm) => {
                let w = 1.0 / perm.len() as f64;
                perm.iter().enumerate().map(|(i, &j)| (i, j, w)).collect()
            }
            PlanKind::Coupling(c) => c
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(k, &w)| (k / c.cols, k % c.cols, w))
                .collect(),
        }
    }

    /// Inner product of the plan with an arbitrary cost of matching shape.
    pub fn cost_under(&self, cost: &CostMatrix) -> f64 {
        self.support().into_iter().map(|(i, j, w)| w * cost.get(i, j)).sum()
    }
}

/// Builds the block coupling that first pairs exactly-equal scores.
///
/// Requires `scores0.len() <= scores1.len()`. Common values are paired
/// greedily in index order with weight `1/n1`; the remaining row mass is then
/// spread over the unpaired columns in north-west-corner order, so unpaired
/// rows never touch paired columns. The resulting matched score gap is at most
/// `1 - m/n1` for scores in `[0, 1]`, where `m` is the number of pairs.
pub fn construct_common_point_coupling(scores0: &[f64], scores1: &[f64]) -> Result<TransportPlan> {
    let (n0, n1) = (scores0.len(), scores1.len());
    if n0 == 0 || n1 == 0 {
        return Err(Error::Empty("score list"));
    }
    if n0 > n1 {
        return Err(Error::InvalidArgument(format!(
            "expected n0 <= n1, got {n0} > {n1}; swap the groups"
        )));
    }

    let mut col_used = vec![false; n1];
    let mut partner: Vec<Option<usize>> = vec![None; n0];
    for (i, a) in scores0.iter().enumerate() {
        if let Some(j) = (0..n1).find(|&j| !col_used[j] && scores1[j] == *a) {
            col_used[j] = true;
            partner[i] = Some(j);
        }
    }

    // Integer masses in units of 1/(n0*n1): rows carry n1, columns carry n0.
    let mut flows = vec![0u64; n0 * n1];
    let mut row_left = vec![n1 as u64; n0];
    let mut col_left = vec![n0 as u64; n1];
    for (i, p) in partner.iter().enumerate() {
        if let Some(j) = *p {
            flows[i * n1 + j] = n0 as u64;
            row_left[i] -= n0 as u64;
            col_left[j] = 0;
        }
    }

    // Paired rows first, then unpaired rows, against unpaired columns.
    let rows: Vec<usize> = (0..n0)
        .filter(|&i| partner[i].is_some())
        .chain((0..n0).filter(|&i| partner[i].is_none()))
        .collect();
    let cols: Vec<usize> = (0..n1).filter(|&j| !col_used[j]).collect();
    let (mut r, mut c) = (0, 0);
    while r < rows.len() && c < cols.len() {
        let (i, j) = (rows[r], cols[c]);
        let f = row_left[i].min(col_left[j]);
        flows[i * n1 + j] += f;
        row_left[i] -= f;
        col_left[j] -= f;
        if row_left[i] == 0 {
            r += 1;
        }
        if col_left[j] == 0 {
            c += 1;
        }
    }
    debug_assert!(row_left.iter().all(|&x| x == 0) && col_left.iter().all(|&x| x == 0));

    let scale = (n0 * n1) as f64;
    let coupling = Coupling {
        rows: n0,
        cols: n1,
        weights: flows.into_iter().map(|f| f as f64 / scale).collect(),
    };
    let gap = CostMatrix::from_fn(n0, n1, |i, j| (scores0[i] - scores1[j]).abs())?;
    Ok(TransportPlan::from_coupling(coupling, &gap))
}

/// Number of exactly-equal score pairs found by greedy multiset matching.
pub fn common_point_count(scores0: &[f64], scores1: &[f64]) -> usize {
    let mut used = vec![false; scores1.len()];
    scores0
        .iter()
        .filter(|a| match (0..scores1.len()).find(|&j| !used[j] && scores1[j] == **a) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        })
        .count()
}
