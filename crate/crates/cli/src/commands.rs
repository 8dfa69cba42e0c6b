//! The five workflows. Each writes its artifacts under `RunSpec::out_dir`
//! and returns the in-memory result.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ftm_core::data::Dataset;
use ftm_core::matching::{estimate_fair_matching, estimate_ot_matching};
use ftm_core::metrics::{
    self, consistency, evaluate, flip_confusion, random_hyperplane_subsets, row_scores, spearman_rank_corr,
    subset_dp_bar, BoxplotSummary, EvalOptions, FairnessReport, FlipConfusion, SWEEP_CSV_HEADER,
};
use ftm_core::model::{Checkpoint, Scorer};
use ftm_core::seed::derive_seed;
use ftm_core::trainer::{self, TrainConfig, TrainLog};
use ftm_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::source::{DatasetSource, LoadedModel, Splits};

/// Evaluation knobs shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub tau: f64,
    pub tv_bins: usize,
    /// Batch size and count for mini-batch matching estimates.
    pub match_batch_size: usize,
    pub match_batches: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            tau: metrics::DEFAULT_TAU,
            tv_bins: metrics::DEFAULT_TV_BINS,
            match_batch_size: 1024,
            match_batches: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Train,
    Evaluate {
        checkpoint: String,
    },
    Sweep {
        lambdas: Vec<f64>,
        jobs: usize,
    },
    Audit {
        checkpoint: String,
        reference: Option<String>,
    },
    Subsets {
        checkpoint: String,
        num_subsets: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::Audit { .. } => "audit",
            Command::Subsets { .. } => "subsets",
        }
    }
}

/// Everything one invocation needs. All randomness derives from
/// `train.seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub dataset: DatasetSource,
    pub split_ratio: f64,
    pub minority_frac: Option<f64>,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub out_dir: PathBuf,
}

impl RunSpec {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    fn load(&self) -> Result<Splits> {
        self.dataset.load(self.split_ratio, self.minority_frac, self.seed())
    }

    fn eval_options(&self, with_matching: bool) -> EvalOptions {
        EvalOptions {
            tau: self.eval.tau,
            tv_bins: self.eval.tv_bins,
            matching: with_matching.then(|| {
                (
                    self.eval.match_batch_size,
                    self.eval.match_batches,
                    derive_seed(self.seed(), "eval-matching", 0),
                )
            }),
            consistency: true,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

/// Timing and provenance kept out of the reproducible reports.
#[derive(Debug, Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    started_unix_secs: u64,
    elapsed_secs: f64,
    dataset: String,
}

fn write_meta(spec: &RunSpec, started: SystemTime, clock: Instant) -> Result<()> {
    let meta = Meta {
        command: spec.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        started_unix_secs: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        elapsed_secs: clock.elapsed().as_secs_f64(),
        dataset: spec.dataset.describe(),
    };
    write_json(&spec.out_dir.join("meta.json"), &meta)
}

/// Run settings echoed at the top of train and evaluate reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub dataset: String,
    pub method: String,
    pub lambda: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub match_batch_size: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    #[serde(flatten)]
    pub metrics: FairnessReport,
}

impl RunReport {
    fn new(spec: &RunSpec, splits: &Splits, metrics: FairnessReport) -> Self {
        Self {
            command: spec.command.name().to_string(),
            dataset: spec.dataset.describe(),
            method: spec.train.method.to_string(),
            lambda: spec.train.lambda,
            alpha: spec.train.alpha,
            epochs: spec.train.epochs,
            batch_size: spec.train.batch_size,
            match_batch_size: spec.train.match_batch_size,
            seed: spec.seed(),
            n_train: splits.train.len(),
            n_test: splits.test.len(),
            dim: splits.train.dim(),
            metrics,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ftm_core::model::Mlp,
    pub log: TrainLog,
    pub report: RunReport,
}

/// Trains on the train split, evaluates on the test split, and writes
/// `model.json`, `report.json`, `train_log.jsonl` and `meta.json`.
pub fn cmd_train(spec: &RunSpec) -> Result<TrainOutput> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let splits = spec.load()?;
    let (model, log) = trainer::train(&splits.train, &spec.train)?;
    let metrics = evaluate(&model, &splits.test, &spec.eval_options(true))?;
    let report = RunReport::new(spec, &splits, metrics);
    write_json(&spec.out_dir.join("model.json"), &Checkpoint::from(&model))?;
    write_json(&spec.out_dir.join("report.json"), &report)?;
    write_file(&spec.out_dir.join("train_log.jsonl"), &log.to_jsonl()?)?;
    write_meta(spec, started, clock)?;
    Ok(TrainOutput { model, log, report })
}

/// Evaluates a checkpoint on the test split and writes `report.json`.
pub fn cmd_evaluate(spec: &RunSpec) -> Result<RunReport> {
    let Command::Evaluate { checkpoint } = &spec.command else {
        return Err(CliError::Usage("cmd_evaluate needs an evaluate command".into()));
    };
    let (started, clock) = (SystemTime::now(), Instant::now());
    let splits = spec.load()?;
    let model = LoadedModel::load(checkpoint)?;
    check_dim(&model, &splits.test)?;
    let metrics = evaluate(&model, &splits.test, &spec.eval_options(true))?;
    let report = RunReport::new(spec, &splits, metrics);
    write_json(&spec.out_dir.join("report.json"), &report)?;
    write_meta(spec, started, clock)?;
    Ok(report)
}

fn check_dim<S: Scorer>(model: &S, data: &Dataset) -> Result<()> {
    if model.input_dim() != data.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: model.input_dim(),
            got: data.dim(),
        }
        .into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: FairnessReport,
}

/// One model per lambda; writes `sweep.csv` (sorted by lambda),
/// `reports/lambda_<k>.json` and `logs/lambda_<k>.jsonl`.
pub fn cmd_sweep(spec: &RunSpec) -> Result<Vec<SweepRow>> {
    let Command::Sweep { lambdas, jobs } = &spec.command else {
        return Err(CliError::Usage("cmd_sweep needs a sweep command".into()));
    };
    if lambdas.is_empty() {
        return Err(CliError::Usage("the lambda grid is empty".into()));
    }
    let (started, clock) = (SystemTime::now(), Instant::now());
    let splits = spec.load()?;
    let points = trainer::sweep(
        &splits.train,
        &splits.test,
        &spec.train,
        lambdas,
        &spec.eval_options(true),
        *jobs,
    )?;
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    let mut rows = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        csv.push_str(&p.report.csv_row(p.lambda));
        csv.push('\n');
        let row = SweepRow {
            lambda: p.lambda,
            seed: p.seed,
            metrics: p.report.clone(),
        };
        write_json(&spec.out_dir.join(format!("reports/lambda_{k}.json")), &row)?;
        write_file(&spec.out_dir.join(format!("logs/lambda_{k}.jsonl")), &p.log.to_jsonl()?)?;
        rows.push(row);
    }
    write_file(&spec.out_dir.join("sweep.csv"), &csv)?;
    write_meta(spec, started, clock)?;
    Ok(rows)
}

/// Fair-matching and flip audit of one model against an optional reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub command: String,
    pub model: String,
    pub dataset: String,
    pub batch_size: usize,
    pub num_batches: usize,
    pub seed: u64,
    /// Mean score gap under the model's fair matching function.
    pub mdp: f64,
    /// Mean squared input distance under the fair matching function.
    pub transport_cost: f64,
    /// Mean score gap under the input-space optimal transport map.
    pub ot_mdp: f64,
    pub ot_transport_cost: f64,
    pub analytic_transport_cost: Option<f64>,
    pub consistency: f64,
    pub dp_bar: f64,
    pub wdp: f64,
    pub tau: f64,
    pub reference: Option<String>,
    pub spearman: Option<f64>,
    pub flips: Option<FlipConfusion>,
}

/// Audits a model on the test split and writes `audit.json`.
pub fn cmd_audit(spec: &RunSpec) -> Result<AuditReport> {
    let Command::Audit { checkpoint, reference } = &spec.command else {
        return Err(CliError::Usage("cmd_audit needs an audit command".into()));
    };
    let (started, clock) = (SystemTime::now(), Instant::now());
    let data = spec.load()?.test;
    let model = LoadedModel::load(checkpoint)?;
    check_dim(&model, &data)?;
    let (m, batches) = (spec.eval.match_batch_size, spec.eval.match_batches);
    let fair = estimate_fair_matching(&model, &data, m, batches, derive_seed(spec.seed(), "audit-fair", 0))?;
    let ot = estimate_ot_matching(&model, &data, m, batches, 0.0, derive_seed(spec.seed(), "audit-ot", 0))?;
    let scores = row_scores(&model, &data);
    let (g0, g1) = metrics::scores_by_group(&model, &data);

    let (spearman, flips) = match reference {
        Some(r) => {
            let unfair = LoadedModel::load(r)?;
            check_dim(&unfair, &data)?;
            let base = row_scores(&unfair, &data);
            let rho = match spearman_rank_corr(&base, &scores) {
                Ok(v) => Some(v),
                Err(CoreError::InvalidArgument(msg)) => {
                    log::warn!("rank correlation skipped: {msg}");
                    None
                }
                Err(e) => return Err(e.into()),
            };
            (
                rho,
                Some(flip_confusion(&base, &scores, data.sensitive(), spec.eval.tau)?),
            )
        }
        None => (None, None),
    };

    let report = AuditReport {
        command: "audit".into(),
        model: checkpoint.clone(),
        dataset: spec.dataset.describe(),
        batch_size: m,
        num_batches: batches,
        seed: spec.seed(),
        mdp: fair.mdp,
        transport_cost: fair.transport_cost,
        ot_mdp: ot.mdp,
        ot_transport_cost: ot.transport_cost,
        analytic_transport_cost: model.analytic_transport_cost(),
        consistency: consistency(&model, &data, spec.eval.tau)?,
        dp_bar: metrics::dp_bar_gap(&g0, &g1)?,
        wdp: metrics::wasserstein_dp(&g0, &g1)?,
        tau: spec.eval.tau,
        reference: reference.clone(),
        spearman,
        flips,
    };
    write_json(&spec.out_dir.join("audit.json"), &report)?;
    write_meta(spec, started, clock)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub command: String,
    pub model: String,
    pub dataset: String,
    pub num_subsets: usize,
    pub seed: u64,
    /// Subsets missing one of the groups; excluded from the statistics.
    pub undefined: usize,
    pub summary: Option<BoxplotSummary>,
    /// Standard deviation formatted to four decimals.
    pub std_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetOutput {
    /// Per subset: size and subset mean-score gap (`None` when undefined).
    pub values: Vec<(usize, Option<f64>)>,
    pub summary: SubsetSummary,
}

/// Mean-score gaps on random half-space subsets of the test split; writes
/// `subsets.csv` and `subsets_summary.json`.
pub fn cmd_subsets(spec: &RunSpec) -> Result<SubsetOutput> {
    let Command::Subsets {
        checkpoint,
        num_subsets,
    } = &spec.command
    else {
        return Err(CliError::Usage("cmd_subsets needs a subsets command".into()));
    };
    let (started, clock) = (SystemTime::now(), Instant::now());
    let data = spec.load()?.test;
    let model = LoadedModel::load(checkpoint)?;
    check_dim(&model, &data)?;
    let scores = row_scores(&model, &data);
    let masks = random_hyperplane_subsets(&data, *num_subsets, derive_seed(spec.seed(), "subsets", 0));

    let mut values = Vec::with_capacity(masks.len());
    let mut csv = String::from("subset,size,dp_bar\n");
    for (k, mask) in masks.iter().enumerate() {
        let size = mask.iter().filter(|&&b| b).count();
        let v = match subset_dp_bar(&scores, data.sensitive(), mask) {
            Ok(v) => Some(v),
            Err(CoreError::UndefinedSubset { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        csv.push_str(&format!(
            "{k},{size},{}\n",
            v.map(|x| x.to_string()).unwrap_or_default()
        ));
        values.push((size, v));
    }
    let defined: Vec<f64> = values.iter().filter_map(|(_, v)| *v).collect();
    let summary = if defined.is_empty() {
        None
    } else {
        Some(BoxplotSummary::from_values(&defined)?)
    };
    let out = SubsetSummary {
        command: "subsets".into(),
        model: checkpoint.clone(),
        dataset: spec.dataset.describe(),
        num_subsets: *num_subsets,
        seed: spec.seed(),
        undefined: values.len() - defined.len(),
        std_label: summary.as_ref().map(|s| format!("{:.4}", s.std)),
        summary,
    };
    write_file(&spec.out_dir.join("subsets.csv"), &csv)?;
    write_json(&spec.out_dir.join("subsets_summary.json"), &out)?;
    write_meta(spec, started, clock)?;
    Ok(SubsetOutput { values, summary: out })
}

pub fn run(spec: &RunSpec) -> Result<()> {
    match spec.command {
        Command::Train => cmd_train(spec).map(|_| ()),
        Command::Evaluate { .. } => cmd_evaluate(spec).map(|_| ()),
        Command::Sweep { .. } => cmd_sweep(spec).map(|_| ()),
        Command::Audit { .. } => cmd_audit(spec).map(|_| ()),
        Command::Subsets { .. } => cmd_subsets(spec).map(|_| ()),
    }
}
