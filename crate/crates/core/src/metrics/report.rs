use serde::{Deserialize, Serialize};

use super::{
    consistency, dp_bar_gap, dp_gap, eo_gaps, ks_dp, row_scores, tv_dp, wasserstein_dp, DEFAULT_TAU, DEFAULT_TV_BINS,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matching::estimate_fair_matching;
use crate::model::Scorer;

/// Column order of [`FairnessReport::csv_row`].
pub const SWEEP_CSV_HEADER: &str = "lambda,acc,dp,dp_bar,wdp,tvdp,ksdp,eo,mdp,transport_cost";

/// Every measure for one model on one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub dp: f64,
    pub dp_bar: f64,
    pub wdp: f64,
    pub tvdp: f64,
    pub ksdp: f64,
    pub tpr_gap: f64,
    pub fpr_gap: f64,
    pub eo: f64,
    pub mdp: Option<f64>,
    pub transport_cost: Option<f64>,
    pub consistency: Option<f64>,
    pub tau: f64,
}

impl FairnessReport {
    pub fn csv_row(&self, lambda: f64) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            lambda,
            self.accuracy,
            self.dp,
            self.dp_bar,
            self.wdp,
            self.tvdp,
            self.ksdp,
            self.eo,
            opt(self.mdp),
            opt(self.transport_cost)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub tau: f64,
    pub tv_bins: usize,
    /// `(batch size, number of batches, seed)` for the mini-batch MDP and
    /// transport-cost estimate; `None` skips it.
    pub matching: Option<(usize, usize, u64)>,
    pub consistency: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            tv_bins: DEFAULT_TV_BINS,
            matching: None,
            consistency: true,
        }
    }
}

pub fn evaluate<S: Scorer + ?Sized>(model: &S, data: &Dataset, opts: &EvalOptions) -> Result<FairnessReport> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let scores = row_scores(model, data);
    let (mut g0, mut g1) = (Vec::new(), Vec::new());
    for (&p, &s) in scores.iter().zip(data.sensitive()) {
        if s == 0 {
            g0.push(p);
        } else {
            g1.push(p);
        }
    }
    let correct = scores
        .iter()
        .zip(data.labels())
        .filter(|(&p, &y)| (p >= opts.tau) == (y == 1))
        .count();
    let eo = eo_gaps(&scores, data.labels(), data.sensitive(), opts.tau)?;
    let matched = match opts.matching {
        Some((m, batches, seed)) => Some(estimate_fair_matching(model, data, m, batches, seed)?),
        None => None,
    };
    Ok(FairnessReport {
        accuracy: correct as f64 / data.len() as f64,
        dp: dp_gap(&g0, &g1, opts.tau)?,
        dp_bar: dp_bar_gap(&g0, &g1)?,
        wdp: wasserstein_dp(&g0, &g1)?,
        tvdp: tv_dp(&g0, &g1, opts.tv_bins)?,
        ksdp: ks_dp(&g0, &g1)?,
        tpr_gap: eo.tpr_gap,
        fpr_gap: eo.fpr_gap,
        eo: eo.eo,
        mdp: matched.map(|e| e.mdp),
        transport_cost: matched.map(|e| e.transport_cost),
        consistency: if opts.consistency {
            Some(consistency(model, data, opts.tau)?)
        } else {
            None
        },
        tau: opts.tau,
    })
}
