//! Fair matching functions and matched demographic parity (MDP).
//!
//! On equal-size batches the MDP-minimizing map pairs equal score ranks
//! across groups (quantile matching). Unequal full-data groups go through a
//! Kantorovich coupling on absolute score gaps instead.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Scorer;
use crate::ot::{build_cost_matrix, solve_assignment, solve_kantorovich, squared_distance, CostMatrix, TransportPlan};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub source: usize,
    pub target: usize,
    /// Absolute score gap between the two partners.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub source_group: u8,
    pub pairs: Vec<MatchPair>,
    /// Mean absolute score gap over the pairs.
    pub mdp: f64,
    /// Mean squared input distance over the pairs; 0 when only scores were
    /// supplied.
    pub transport_cost: f64,
}

impl MatchResult {
    /// `targets()[i]` is the partner of source `i`.
    pub fn targets(&self) -> Vec<usize> {
        let mut t = vec![0; self.pairs.len()];
        for p in &self.pairs {
            t[p.source] = p.target;
        }
        t
    }
}

fn stable_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

fn rank_pairs(source: &[f64], target: &[f64]) -> Vec<MatchPair> {
    let (os, ot) = (stable_order(source), stable_order(target));
    let mut pairs: Vec<MatchPair> = os
        .iter()
        .zip(&ot)
        .map(|(&i, &j)| MatchPair {
            source: i,
            target: j,
            gap: (source[i] - target[j]).abs(),
        })
        .collect();
    pairs.sort_by_key(|p| p.source);
    pairs
}

fn lex_order<P: AsRef<[f64]>>(batch: &[P]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (batch[a].as_ref(), batch[b].as_ref());
        x.iter()
            .zip(y)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

// Score ties are broken by the lexicographic order of the inputs.
fn rank_pairs_permuted(source: &[f64], target: &[f64], ps: &[usize], pt: &[usize]) -> Vec<MatchPair> {
    let s: Vec<f64> = ps.iter().map(|&i| source[i]).collect();
    let t: Vec<f64> = pt.iter().map(|&j| target[j]).collect();
    let mut pairs = rank_pairs(&s, &t);
    for p in &mut pairs {
        p.source = ps[p.source];
        p.target = pt[p.target];
    }
    pairs.sort_by_key(|p| p.source);
    pairs
}

fn mean_gap(pairs: &[MatchPair]) -> f64 {
    pairs.iter().map(|p| p.gap).sum::<f64>() / pairs.len() as f64
}

/// Pairs the rank-`k` score of group 0 with the rank-`k` score of group 1.
///
/// Ties keep their original index order. Pairs are listed by source index.
pub fn quantile_match(scores0: &[f64], scores1: &[f64]) -> Result<MatchResult> {
    if scores0.len() != scores1.len() {
        return Err(Error::SizeMismatch {
            left: scores0.len(),
            right: scores1.len(),
        });
    }
    if scores0.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let pairs = rank_pairs(scores0, scores1);
    Ok(MatchResult {
        source_group: 0,
        mdp: mean_gap(&pairs),
        pairs,
        transport_cost: 0.0,
    })
}

/// Fair matching function of `model` realized on two equal-size batches.
///
/// Group `s` is scored as `f(., s)`. Equal scores are matched in the
/// lexicographic order of their inputs. Both source directions are matched and
/// the one with the smaller MDP is kept (group 0 on ties). Pair indices refer
/// to the source group's batch and the other group's batch respectively.
pub fn fair_matching_function<S, P, Q>(model: &S, batch0: &[P], batch1: &[Q]) -> Result<MatchResult>
where
    S: Scorer + ?Sized,
    P: AsRef<[f64]>,
    Q: AsRef<[f64]>,
{
    if batch0.is_empty() || batch1.is_empty() {
        return Err(Error::Empty("matching batch"));
    }
    if batch0.len() != batch1.len() {
        return Err(Error::SizeMismatch {
            left: batch0.len(),
            right: batch1.len(),
        });
    }
    let s0: Vec<f64> = batch0.iter().map(|x| model.score(x.as_ref(), 0)).collect();
    let s1: Vec<f64> = batch1.iter().map(|x| model.score(x.as_ref(), 1)).collect();

    let (p0, p1) = (lex_order(batch0), lex_order(batch1));
    let from0 = rank_pairs_permuted(&s0, &s1, &p0, &p1);
    let from1 = rank_pairs_permuted(&s1, &s0, &p1, &p0);
    let (m0, m1) = (mean_gap(&from0), mean_gap(&from1));
    let (source_group, pairs, mdp) = if m1 < m0 { (1, from1, m1) } else { (0, from0, m0) };

    let cost: f64 = pairs
        .iter()
        .map(|p| {
            let (a, b) = if source_group == 0 {
                (batch0[p.source].as_ref(), batch1[p.target].as_ref())
            } else {
                (batch1[p.source].as_ref(), batch0[p.target].as_ref())
            };
            squared_distance(a, b)
        })
        .sum();
    Ok(MatchResult {
        source_group,
        transport_cost: cost / pairs.len() as f64,
        pairs,
        mdp,
    })
}

/// Draws `m` positions from `pool`: without replacement when the pool is
/// large enough, with replacement otherwise.
pub fn sample_batch<R: Rng + ?Sized>(pool: &[usize], m: usize, rng: &mut R) -> Vec<usize> {
    if pool.len() >= m {
        index::sample(rng, pool.len(), m).into_iter().map(|k| pool[k]).collect()
    } else {
        (0..m).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}

/// Mini-batch averages of the fair matching function's MDP and transport cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchEstimate {
    pub mdp: f64,
    pub transport_cost: f64,
    pub batch_size: usize,
    pub num_batches: usize,
}

/// Averages the fair matching function over `num_batches` independent pairs
/// of size-`m` group batches. Batch `b` draws from its own RNG stream derived
/// from `(seed, b)`, so the result does not depend on thread scheduling.
pub fn estimate_fair_matching<S: Scorer + ?Sized>(
    model: &S,
    data: &Dataset,
    m: usize,
    num_batches: usize,
    seed: u64,
) -> Result<MatchEstimate> {
    if m == 0 || num_batches == 0 {
        return Err(Error::InvalidArgument("batch size and batch count must be >= 1".into()));
    }
    let g0 = data.group_indices(0);
    let g1 = data.group_indices(1);
    if g0.is_empty() || g1.is_empty() {
        return Err(Error::Empty("sensitive group"));
    }
    let results: Vec<Result<(f64, f64)>> = (0..num_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::stream(seed, "match-estimate", b as u64);
            let i0 = sample_batch(&g0, m, &mut rng);
            let i1 = sample_batch(&g1, m, &mut rng);
            let b0: Vec<&[f64]> = i0.iter().map(|&i| data.row(i)).collect();
            let b1: Vec<&[f64]> = i1.iter().map(|&i| data.row(i)).collect();
            let r = fair_matching_function(model, &b0, &b1)?;
            Ok((r.mdp, r.transport_cost))
        })
        .collect();
    let (mut mdp, mut cost) = (0.0, 0.0);
    for r in results {
        let (a, c) = r?;
        mdp += a;
        cost += c;
    }
    Ok(MatchEstimate {
        mdp: mdp / num_batches as f64,
        transport_cost: cost / num_batches as f64,
        batch_size: m,
        num_batches,
    })
}

pub fn estimate_transport_cost<S: Scorer + ?Sized>(
    model: &S,
    data: &Dataset,
    m: usize,
    num_batches: usize,
    seed: u64,
) -> Result<f64> {
    estimate_fair_matching(model, data, m, num_batches, seed).map(|e| e.transport_cost)
}

/// Averages the model's MDP and transport cost under the optimal-transport
/// map on inputs (cost `|x - x'|^2 + alpha * |y - y'|`), estimated on
/// `num_batches` pairs of size-`m` group batches with group 0 as the source.
pub fn estimate_ot_matching<S: Scorer + ?Sized>(
    model: &S,
    data: &Dataset,
    m: usize,
    num_batches: usize,
    alpha: f64,
    seed: u64,
) -> Result<MatchEstimate> {
    if m == 0 || num_batches == 0 {
        return Err(Error::InvalidArgument("batch size and batch count must be >= 1".into()));
    }
    let g0 = data.group_indices(0);
    let g1 = data.group_indices(1);
    if g0.is_empty() || g1.is_empty() {
        return Err(Error::Empty("sensitive group"));
    }
    let labels = data.labels();
    let results: Vec<Result<(f64, f64)>> = (0..num_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::stream(seed, "ot-estimate", b as u64);
            let i0 = sample_batch(&g0, m, &mut rng);
            let i1 = sample_batch(&g1, m, &mut rng);
            let b0: Vec<&[f64]> = i0.iter().map(|&i| data.row(i)).collect();
            let b1: Vec<&[f64]> = i1.iter().map(|&i| data.row(i)).collect();
            let y0: Vec<u8> = i0.iter().map(|&i| labels[i]).collect();
            let y1: Vec<u8> = i1.iter().map(|&i| labels[i]).collect();
            let ys = (alpha > 0.0).then_some((y0.as_slice(), y1.as_slice()));
            let cost = build_cost_matrix(&b0, &b1, ys, alpha)?;
            let plan = solve_assignment(&cost)?;
            let perm = plan.assignment().expect("assignment plan");
            let (mut gap, mut dist) = (0.0, 0.0);
            for (i, &j) in perm.iter().enumerate() {
                gap += (model.score(b0[i], 0) - model.score(b1[j], 1)).abs();
                dist += squared_distance(b0[i], b1[j]);
            }
            Ok((gap / m as f64, dist / m as f64))
        })
        .collect();
    let (mut mdp, mut cost) = (0.0, 0.0);
    for r in results {
        let (a, c) = r?;
        mdp += a;
        cost += c;
    }
    Ok(MatchEstimate {
        mdp: mdp / num_batches as f64,
        transport_cost: cost / num_batches as f64,
        batch_size: m,
        num_batches,
    })
}

/// Kantorovich coupling between two score lists of any sizes, minimizing the
/// expected absolute score gap. Its `total_cost` is the realized MDP.
pub fn stochastic_fair_match(scores0: &[f64], scores1: &[f64]) -> Result<TransportPlan> {
    if scores0.is_empty() || scores1.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let cost = CostMatrix::from_fn(scores0.len(), scores1.len(), |i, j| (scores0[i] - scores1[j]).abs())?;
    solve_kantorovich(&cost)
}
