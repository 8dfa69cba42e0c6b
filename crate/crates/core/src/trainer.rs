//! Training loops: FTM (cross-entropy plus a matched score-gap penalty over
//! optimal-transport matchings), the squared mean-gap `Reg` baseline, and
//! plain cross-entropy.
//!
//! Each epoch walks a seeded shuffle of the training rows in loss batches.
//! FTM additionally draws two equal-size group batches per step (or once per
//! epoch), matches them by an exact assignment on squared distance plus
//! `alpha * |label gap|`, and penalises `lambda * mean |f(x, s) - f(T x, s')|`.
//! The assignment is held fixed when differentiating.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matching::sample_batch;
use crate::metrics::{self, evaluate, EvalOptions, FairnessReport};
use crate::model::{adam_step, cross_entropy, Mlp, OptimizerState, Scorer};
use crate::ot::{build_cost_matrix, solve_assignment};
use crate::seed;

/// Fairness-control grid used for FTM sweeps.
pub const FTM_LAMBDA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ftm,
    Reg,
    Unfair,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ftm => "ftm",
            Method::Reg => "reg",
            Method::Unfair => "unfair",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ftm" => Ok(Method::Ftm),
            "reg" => Ok(Method::Reg),
            "unfair" => Ok(Method::Unfair),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Which group's batch is the matching source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceDirection {
    Group0,
    Group1,
    /// Group 0 on even steps, group 1 on odd steps.
    Alternate,
}

impl SourceDirection {
    fn source_at(self, step: u64) -> u8 {
        match self {
            SourceDirection::Group0 => 0,
            SourceDirection::Group1 => 1,
            SourceDirection::Alternate => (step % 2) as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub lambda: f64,
    /// Weight of the label gap in the matching cost; 0 matches on inputs only.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub match_batch_size: usize,
    pub source_direction: SourceDirection,
    /// Draw the matching batches once per epoch instead of once per step.
    pub match_per_epoch: bool,
    pub seed: u64,
    pub lr: f64,
    pub lr_decay: f64,
    /// Hidden widths; `None` means two layers as wide as the network input.
    pub hidden: Option<Vec<usize>>,
    pub include_sensitive: bool,
    pub tau: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Ftm,
            lambda: 1.0,
            alpha: 0.0,
            epochs: 200,
            batch_size: 1024,
            match_batch_size: 1024,
            source_direction: SourceDirection::Alternate,
            match_per_epoch: false,
            seed: 0,
            lr: 0.001,
            lr_decay: 0.95,
            hidden: None,
            include_sensitive: true,
            tau: metrics::DEFAULT_TAU,
        }
    }
}

impl TrainConfig {
    /// Loss and matching batch sizes for a named dataset preset.
    pub fn batch_size_for(preset: &str) -> Option<usize> {
        match preset {
            "adult" | "dutch" => Some(1024),
            "german" => Some(200),
            "bank" => Some(512),
            _ => None,
        }
    }

    pub fn for_preset(preset: &str) -> Self {
        let b = Self::batch_size_for(preset).unwrap_or(1024);
        Self {
            batch_size: b,
            match_batch_size: b,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 || self.match_batch_size == 0 {
            return bad("batch sizes must be >= 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite value >= 0");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be a finite value >= 0");
        }
        if !(self.lr > 0.0 && self.lr_decay > 0.0) {
            return bad("learning rate and decay must be positive");
        }
        Ok(())
    }

    fn penalised(&self) -> bool {
        self.method != Method::Unfair && self.lambda > 0.0
    }
}

/// Per-epoch training record, written as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy over the epoch's loss batches.
    pub loss: f64,
    /// Mean unweighted penalty (matched gap for FTM, squared mean gap for Reg).
    pub penalty: f64,
    /// Mean matched score gap over the epoch's matching batches (FTM only).
    pub batch_mdp: Option<f64>,
    /// Mean fraction of matched pairs with equal labels (FTM only).
    pub match_label_agreement: Option<f64>,
    /// Mean squared input distance over matched pairs (FTM only).
    pub match_transport_cost: Option<f64>,
    pub train_accuracy: f64,
    pub train_dp_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

struct StepPenalty {
    value: f64,
    label_agreement: f64,
    transport_cost: f64,
}

/// Owns the model, the optimizer and the step counter of one training run.
pub struct Trainer<'a> {
    pub model: Mlp,
    pub optimizer: OptimizerState,
    config: &'a TrainConfig,
    data: &'a Dataset,
    groups: [Vec<usize>; 2],
    step: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a Dataset, config: &'a TrainConfig) -> Result<Self> {
        let mut rng = seed::stream(config.seed, "init", 0);
        let model = match &config.hidden {
            Some(h) => Mlp::new(data.dim(), h, config.include_sensitive, &mut rng),
            None => Mlp::with_default_width(data.dim(), config.include_sensitive, &mut rng),
        };
        Self::with_model(data, config, model)
    }

    pub fn with_model(data: &'a Dataset, config: &'a TrainConfig, model: Mlp) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        if model.input_dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                got: data.dim(),
            });
        }
        let groups = [data.group_indices(0), data.group_indices(1)];
        if config.method == Method::Ftm && config.penalised() && groups.iter().any(Vec::is_empty) {
            return Err(Error::Empty("sensitive group"));
        }
        let optimizer = OptimizerState::new(model.num_params(), config.lr, config.lr_decay);
        Ok(Self {
            model,
            optimizer,
            config,
            data,
            groups,
            step: 0,
        })
    }

    /// Cross-entropy gradient of one loss batch, accumulated into `grads`.
    fn loss_grad(&self, batch: &[usize], grads: &mut [f64]) -> Result<(f64, Vec<f64>)> {
        let xs: Vec<&[f64]> = batch.iter().map(|&i| self.data.row(i)).collect();
        let ss: Vec<u8> = batch.iter().map(|&i| self.data.sensitive()[i]).collect();
        let scores = self.model.forward_batch(&xs, &ss)?;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let upstream: Vec<f64> = scores
            .iter()
            .zip(batch)
            .map(|(&p, &i)| {
                let (l, dl) = cross_entropy(p, self.data.labels()[i]);
                loss += l;
                dl / n
            })
            .collect();
        self.model.backward_into(&xs, &ss, &upstream, grads)?;
        Ok((loss / n, scores))
    }

    fn matching_pair(&self, rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
        let m = self.config.match_batch_size;
        [
            sample_batch(&self.groups[0], m, rng),
            sample_batch(&self.groups[1], m, rng),
        ]
    }

    /// Matched-gap penalty on two group batches; adds `lambda` times its
    /// gradient into `grads`.
    fn ftm_penalty(&self, batches: &[Vec<usize>; 2], source: u8, grads: &mut [f64]) -> Result<StepPenalty> {
        let target = 1 - source;
        let (src, tgt) = (&batches[source as usize], &batches[target as usize]);
        let xs_src: Vec<&[f64]> = src.iter().map(|&i| self.data.row(i)).collect();
        let xs_tgt: Vec<&[f64]> = tgt.iter().map(|&i| self.data.row(i)).collect();
        let labels = self.data.labels();
        let (ys_src, ys_tgt): (Vec<u8>, Vec<u8>) = (
            src.iter().map(|&i| labels[i]).collect(),
            tgt.iter().map(|&i| labels[i]).collect(),
        );
        let label_arg = (self.config.alpha > 0.0).then_some((ys_src.as_slice(), ys_tgt.as_slice()));
        let cost = build_cost_matrix(&xs_src, &xs_tgt, label_arg, self.config.alpha)?;
        let plan = solve_assignment(&cost)?;
        let perm = plan.assignment().expect("assignment plan");

        let m = src.len();
        let mut xs: Vec<&[f64]> = Vec::with_capacity(2 * m);
        let mut ss: Vec<u8> = Vec::with_capacity(2 * m);
        for (i, &j) in perm.iter().enumerate() {
            xs.push(xs_src[i]);
            ss.push(source);
            xs.push(xs_tgt[j]);
            ss.push(target);
        }
        let scores = self.model.forward_batch(&xs, &ss)?;
        let (mut gap_sum, mut agree, mut dist) = (0.0, 0usize, 0.0);
        let mut upstream = vec![0.0; 2 * m];
        let w = self.config.lambda / m as f64;
        for (k, (i, &j)) in perm.iter().enumerate().enumerate() {
            let d = scores[2 * k] - scores[2 * k + 1];
            gap_sum += d.abs();
            let sgn = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            upstream[2 * k] = w * sgn;
            upstream[2 * k + 1] = -w * sgn;
            agree += usize::from(ys_src[i] == ys_tgt[j]);
            dist += crate::ot::squared_distance(xs_src[i], xs_tgt[j]);
        }
        self.model.backward_into(&xs, &ss, &upstream, grads)?;
        Ok(StepPenalty {
            value: gap_sum / m as f64,
            label_agreement: agree as f64 / m as f64,
            transport_cost: dist / m as f64,
        })
    }

    /// Squared mean-score gap within the loss batch; adds `lambda` times its
    /// gradient into `grads`. A batch missing a group contributes nothing.
    fn reg_penalty(&self, batch: &[usize], scores: &[f64], grads: &mut [f64]) -> Result<f64> {
        let sens = self.data.sensitive();
        let (mut sum, mut cnt) = ([0.0f64; 2], [0usize; 2]);
        for (&i, &p) in batch.iter().zip(scores) {
            sum[sens[i] as usize] += p;
            cnt[sens[i] as usize] += 1;
        }
        if cnt[0] == 0 || cnt[1] == 0 {
            return Ok(0.0);
        }
        let gap = sum[0] / cnt[0] as f64 - sum[1] / cnt[1] as f64;
        let xs: Vec<&[f64]> = batch.iter().map(|&i| self.data.row(i)).collect();
        let ss: Vec<u8> = batch.iter().map(|&i| sens[i]).collect();
        let upstream: Vec<f64> = ss
            .iter()
            .map(|&s| {
                let sign = if s == 0 { 1.0 } else { -1.0 };
                2.0 * self.config.lambda * gap * sign / cnt[s as usize] as f64
            })
            .collect();
        self.model.backward_into(&xs, &ss, &upstream, grads)?;
        Ok(gap * gap)
    }

    fn loss_batches(&self, epoch: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut seed::stream(self.config.seed, "loss-batches", epoch as u64));
        order.chunks(self.config.batch_size).map(<[usize]>::to_vec).collect()
    }

    /// One pass over the training rows with the FTM objective.
    pub fn ftm_epoch(&mut self, epoch: usize) -> Result<EpochStats> {
        let mut match_rng = seed::stream(self.config.seed, "match-batches", epoch as u64);
        let penalised = self.config.penalised();
        let fixed = (penalised && self.config.match_per_epoch).then(|| self.matching_pair(&mut match_rng));
        let batches = self.loss_batches(epoch);
        let mut totals = [0.0f64; 5];
        for batch in &batches {
            let mut grads = vec![0.0; self.model.num_params()];
            let (loss, _) = self.loss_grad(batch, &mut grads)?;
            totals[0] += loss;
            if penalised {
                let pair = match &fixed {
                    Some(p) => p.clone(),
                    None => self.matching_pair(&mut match_rng),
                };
                let source = self.config.source_direction.source_at(self.step);
                let p = self.ftm_penalty(&pair, source, &mut grads)?;
                totals[1] += p.value;
                totals[2] += p.label_agreement;
                totals[3] += p.transport_cost;
            }
            adam_step(self.model.params_mut(), &grads, &mut self.optimizer);
            self.step += 1;
        }
        let k = batches.len() as f64;
        let mut stats = self.finish_epoch(epoch, totals[0] / k, totals[1] / k)?;
        if penalised {
            stats.batch_mdp = Some(totals[1] / k);
            stats.match_label_agreement = Some(totals[2] / k);
            stats.match_transport_cost = Some(totals[3] / k);
        }
        Ok(stats)
    }

    /// One pass over the training rows with the squared mean-gap penalty.
    pub fn reg_epoch(&mut self, epoch: usize) -> Result<EpochStats> {
        let penalised = self.config.penalised();
        let batches = self.loss_batches(epoch);
        let (mut loss_sum, mut pen_sum) = (0.0, 0.0);
        for batch in &batches {
            let mut grads = vec![0.0; self.model.num_params()];
            let (loss, scores) = self.loss_grad(batch, &mut grads)?;
            loss_sum += loss;
            if penalised {
                pen_sum += self.reg_penalty(batch, &scores, &mut grads)?;
            }
            adam_step(self.model.params_mut(), &grads, &mut self.optimizer);
            self.step += 1;
        }
        let k = batches.len() as f64;
        self.finish_epoch(epoch, loss_sum / k, pen_sum / k)
    }

    fn finish_epoch(&mut self, epoch: usize, loss: f64, penalty: f64) -> Result<EpochStats> {
        let lr = self.optimizer.lr;
        self.optimizer.end_epoch();
        let scores = metrics::row_scores(&self.model, self.data);
        let correct = scores
            .iter()
            .zip(self.data.labels())
            .filter(|(&p, &y)| (p >= self.config.tau) == (y == 1))
            .count();
        let mut g = [Vec::new(), Vec::new()];
        for (&p, &s) in scores.iter().zip(self.data.sensitive()) {
            g[s as usize].push(p);
        }
        let train_dp_bar = metrics::dp_bar_gap(&g[0], &g[1]).unwrap_or(0.0);
        Ok(EpochStats {
            epoch,
            lr,
            loss,
            penalty,
            batch_mdp: None,
            match_label_agreement: None,
            match_transport_cost: None,
            train_accuracy: correct as f64 / self.data.len() as f64,
            train_dp_bar,
        })
    }

    pub fn run_epoch(&mut self, epoch: usize) -> Result<EpochStats> {
        match self.config.method {
            Method::Reg => self.reg_epoch(epoch),
            Method::Ftm | Method::Unfair => self.ftm_epoch(epoch),
        }
    }
}

/// Trains a fresh model; deterministic for a fixed config.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<(Mlp, TrainLog)> {
    let mut trainer = Trainer::new(data, config)?;
    let mut log = TrainLog::default();
    for epoch in 0..config.epochs {
        let stats = trainer.run_epoch(epoch)?;
        log::debug!(
            "epoch {epoch}: loss {:.4} penalty {:.4} acc {:.4}",
            stats.loss,
            stats.penalty,
            stats.train_accuracy
        );
        log.epochs.push(stats);
    }
    Ok((trainer.model, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub seed: u64,
    pub report: FairnessReport,
    pub log: TrainLog,
    #[serde(skip)]
    pub model: Option<Mlp>,
}

/// Trains one model per `lambda` (sorted ascending) and evaluates each on
/// `test`. Point `k` uses the seed derived from `(base.seed, k)`. Runs on at
/// most `jobs` threads; results do not depend on `jobs`.
pub fn sweep(
    train_data: &Dataset,
    test_data: &Dataset,
    base: &TrainConfig,
    lambda_grid: &[f64],
    eval: &EvalOptions,
    jobs: usize,
) -> Result<Vec<SweepPoint>> {
    let mut grid = lambda_grid.to_vec();
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument(
            "lambda grid values must be finite and >= 0".into(),
        ));
    }
    grid.sort_by(f64::total_cmp);
    let run = |(k, &lambda): (usize, &f64)| -> Result<SweepPoint> {
        let cfg = TrainConfig {
            lambda,
            seed: seed::derive_seed(base.seed, "sweep", k as u64),
            ..base.clone()
        };
        let (model, log) = train(train_data, &cfg)?;
        let report = evaluate(&model, test_data, eval)?;
        Ok(SweepPoint {
            lambda,
            seed: cfg.seed,
            report,
            log,
            model: Some(model),
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| grid.par_iter().enumerate().map(run).collect())
}

#[cfg(test)]
mod tests;
