//! Group-fairness measures and audits.
//!
//! Scores are model outputs in `[0, 1]`. Functions that compare two groups
//! take the group-0 and group-1 score lists separately; row-level functions
//! take parallel `scores` / `groups` (/ `labels`) slices.

mod report;
mod summary;

pub use report::{evaluate, EvalOptions, FairnessReport, SWEEP_CSV_HEADER};
pub use summary::BoxplotSummary;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Scorer;
use crate::seed;

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_TV_BINS: usize = 100;

fn non_empty(scores: &[f64], what: &'static str) -> Result<()> {
    if scores.is_empty() {
        Err(Error::Empty(what))
    } else {
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn positive_rate(scores: &[f64], tau: f64) -> f64 {
    scores.iter().filter(|&&p| p >= tau).count() as f64 / scores.len() as f64
}

/// Scores of every row under its own sensitive attribute, split by group.
pub fn scores_by_group<S: Scorer + ?Sized>(model: &S, data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let mut out = (Vec::new(), Vec::new());
    for (i, x) in data.rows().enumerate() {
        let s = data.sensitive()[i];
        let p = model.score(x, s);
        if s == 0 {
            out.0.push(p);
        } else {
            out.1.push(p);
        }
    }
    out
}

/// Scores of every row under its own sensitive attribute, in row order.
pub fn row_scores<S: Scorer + ?Sized>(model: &S, data: &Dataset) -> Vec<f64> {
    data.rows()
        .zip(data.sensitive())
        .map(|(x, &s)| model.score(x, s))
        .collect()
}

/// Gap in positive-prediction rates at threshold `tau`.
pub fn dp_gap(scores0: &[f64], scores1: &[f64], tau: f64) -> Result<f64> {
    non_empty(scores0, "group 0 scores")?;
    non_empty(scores1, "group 1 scores")?;
    Ok((positive_rate(scores0, tau) - positive_rate(scores1, tau)).abs())
}

/// Gap in mean scores.
pub fn dp_bar_gap(scores0: &[f64], scores1: &[f64]) -> Result<f64> {
    non_empty(scores0, "group 0 scores")?;
    non_empty(scores1, "group 1 scores")?;
    Ok((mean(scores0) - mean(scores1)).abs())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// 1-Wasserstein distance between the two empirical score distributions.
///
/// Walks both sorted lists with masses `1/n0` and `1/n1`, moving mass between
/// the current quantiles (the monotone coupling, optimal on the line). For
/// equal sizes this is the mean gap between equal-rank scores. Masses are
/// tracked in integer units of `1/(n0*n1)`.
pub fn wasserstein_dp(scores0: &[f64], scores1: &[f64]) -> Result<f64> {
    non_empty(scores0, "group 0 scores")?;
    non_empty(scores1, "group 1 scores")?;
    let (a, b) = (sorted(scores0), sorted(scores1));
    let (n0, n1) = (a.len() as u64, b.len() as u64);
    if n0 == n1 {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n0 as f64);
    }
    let (mut i, mut j) = (0usize, 0usize);
    let (mut left_a, mut left_b) = (n1, n0);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let mass = left_a.min(left_b);
        total += mass as f64 * (a[i] - b[j]).abs();
        left_a -= mass;
        left_b -= mass;
        if left_a == 0 {
            i += 1;
            left_a = n1;
        }
        if left_b == 0 {
            j += 1;
            left_b = n0;
        }
    }
    Ok(total / (n0 * n1) as f64)
}

fn histogram(scores: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let w = 1.0 / scores.len() as f64;
    for &p in scores {
        let k = ((p.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
        h[k] += w;
    }
    h
}

/// Total variation between score histograms on a uniform binning of `[0, 1]`.
pub fn tv_dp(scores0: &[f64], scores1: &[f64], num_bins: usize) -> Result<f64> {
    non_empty(scores0, "group 0 scores")?;
    non_empty(scores1, "group 1 scores")?;
    if num_bins == 0 {
        return Err(Error::InvalidArgument("num_bins must be >= 1".into()));
    }
    let (h0, h1) = (histogram(scores0, num_bins), histogram(scores1, num_bins));
    Ok(0.5 * h0.iter().zip(&h1).map(|(p, q)| (p - q).abs()).sum::<f64>())
}

/// Largest gap between the two empirical CDFs.
pub fn ks_dp(scores0: &[f64], scores1: &[f64]) -> Result<f64> {
    non_empty(scores0, "group 0 scores")?;
    non_empty(scores1, "group 1 scores")?;
    let (a, b) = (sorted(scores0), sorted(scores1));
    let (n0, n1) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    while i < a.len() || j < b.len() {
        // Next breakpoint: advance past every copy of the smallest value.
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / n0 - j as f64 / n1).abs());
    }
    Ok(best)
}

/// Mean-score gap restricted to the rows where `mask` is set.
pub fn subset_dp_bar(scores: &[f64], groups: &[u8], mask: &[bool]) -> Result<f64> {
    if scores.len() != groups.len() || scores.len() != mask.len() {
        return Err(Error::SizeMismatch {
            left: scores.len(),
            right: groups.len().min(mask.len()),
        });
    }
    let (mut sum, mut cnt) = ([0.0f64; 2], [0usize; 2]);
    for ((&p, &g), &m) in scores.iter().zip(groups).zip(mask) {
        if m {
            sum[g as usize] += p;
            cnt[g as usize] += 1;
        }
    }
    for g in 0..2u8 {
        if cnt[g as usize] == 0 {
            return Err(Error::UndefinedSubset { group: g });
        }
    }
    Ok((sum[0] / cnt[0] as f64 - sum[1] / cnt[1] as f64).abs())
}

/// Half-space masks `{i : v . x_i >= 0}` for `v ~ Unif[-1, 1]^d`.
///
/// A draw with `v = 0` (the all-rows mask) is rejected and redrawn.
pub fn random_hyperplane_subsets(data: &Dataset, num_subsets: usize, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = seed::stream(seed, "hyperplane-subsets", 0);
    let d = data.dim();
    (0..num_subsets)
        .map(|_| {
            let v: Vec<f64> = loop {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                if v.iter().any(|&c| c != 0.0) {
                    break v;
                }
            };
            data.rows()
                .map(|x| x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() >= 0.0)
                .collect()
        })
        .collect()
}

/// True/false positive rate gaps and their average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoGaps {
    pub tpr_gap: f64,
    pub fpr_gap: f64,
    pub eo: f64,
}

pub fn eo_gaps(scores: &[f64], labels: &[u8], groups: &[u8], tau: f64) -> Result<EoGaps> {
    if scores.len() != labels.len() || scores.len() != groups.len() {
        return Err(Error::SizeMismatch {
            left: scores.len(),
            right: labels.len().min(groups.len()),
        });
    }
    // [group][label] -> (positives, count)
    let mut cells = [[(0usize, 0usize); 2]; 2];
    for ((&p, &y), &g) in scores.iter().zip(labels).zip(groups) {
        let c = &mut cells[g as usize][y as usize];
        c.1 += 1;
        if p >= tau {
            c.0 += 1;
        }
    }
    let mut rate = [[0.0; 2]; 2];
    for g in 0..2 {
        for y in 0..2 {
            let (pos, n) = cells[g][y];
            if n == 0 {
                return Err(Error::EmptyCell {
                    group: g as u8,
                    label: y as u8,
                });
            }
            rate[g][y] = pos as f64 / n as f64;
        }
    }
    let tpr_gap = (rate[0][1] - rate[1][1]).abs();
    let fpr_gap = (rate[0][0] - rate[1][0]).abs();
    Ok(EoGaps {
        tpr_gap,
        fpr_gap,
        eo: (tpr_gap + fpr_gap) / 2.0,
    })
}

/// Fraction of rows whose thresholded prediction survives flipping `s`.
pub fn consistency<S: Scorer + ?Sized>(model: &S, data: &Dataset, tau: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let same = data
        .rows()
        .zip(data.sensitive())
        .filter(|(x, &s)| (model.score(x, s) >= tau) == (model.score(x, 1 - s) >= tau))
        .count();
    Ok(same as f64 / data.len() as f64)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation: Pearson correlation of average ranks.
pub fn spearman_rank_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Empty("need at least two paired scores"));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let (ma, mb) = (mean(&ra), mean(&rb));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidArgument(
            "rank correlation undefined for constant scores".into(),
        ));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Per-group 2x2 table of (unfair prediction, fair prediction) counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct FlipTable {
    /// `counts[unfair][fair]`.
    pub counts: [[usize; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FlipConfusion {
    pub group0: FlipTable,
    pub group1: FlipTable,
    /// Group 1 rows flipped 0 -> 1 plus group 0 rows flipped 1 -> 0.
    pub undesirable_flips: usize,
}

pub fn flip_confusion(unfair: &[f64], fair: &[f64], groups: &[u8], tau: f64) -> Result<FlipConfusion> {
    if unfair.len() != fair.len() || unfair.len() != groups.len() {
        return Err(Error::SizeMismatch {
            left: unfair.len(),
            right: fair.len().min(groups.len()),
        });
    }
    let mut tables = [FlipTable::default(); 2];
    for ((&u, &f), &g) in unfair.iter().zip(fair).zip(groups) {
        tables[g as usize].counts[usize::from(u >= tau)][usize::from(f >= tau)] += 1;
    }
    Ok(FlipConfusion {
        group0: tables[0],
        group1: tables[1],
        undesirable_flips: tables[1].counts[0][1] + tables[0].counts[1][0],
    })
}

#[cfg(test)]
mod tests;
