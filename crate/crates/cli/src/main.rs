use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ftm_cli::{run, Command, DatasetSource, EvalSettings, RunSpec, SyntheticParams};
use ftm_core::trainer::{Method, SourceDirection, TrainConfig, FTM_LAMBDA_GRID};

/// Fairness-through-matching: train group-fair classifiers with a matched
/// demographic parity penalty and audit them.
#[derive(Debug, Parser)]
#[command(name = "ftm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Train one model and evaluate it on the test split.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint path, `builtin:f_hat` or `builtin:f_tilde`.
        #[arg(long)]
        checkpoint: String,
    },
    /// Train one model per lambda and write a trade-off table.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated lambda grid [default: the FTM grid 0.1 .. 10].
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Models trained in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Fair-matching transport cost, consistency and flip audit.
    Audit {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint path, `builtin:f_hat` or `builtin:f_tilde`.
        #[arg(long)]
        checkpoint: String,
        /// Unfair reference checkpoint for rank correlation and flip counts.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Mean-score gaps on random half-space subsets (box-plot data).
    Subsets {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: String,
        #[arg(long, default_value_t = 1000)]
        num_subsets: usize,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// `synthetic`, `grid`, a cached `.json` dataset, or a CSV path.
    #[arg(long, default_value = "synthetic")]
    dataset: String,
    /// Schema for CSV input: a preset (adult, german, dutch, bank) or a TOML file.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory [default: $FTM_OUT_DIR, else ./ftm-out].
    #[arg(long, env = "FTM_OUT_DIR", default_value = "ftm-out")]
    out: PathBuf,
    /// Fraction of rows in the train split.
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    /// Subsample group 0 of the train split to this share.
    #[arg(long)]
    minority_frac: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 100)]
    tv_bins: usize,
    /// Batch size of the matching estimates in reports and audits.
    #[arg(long, default_value_t = 1024)]
    audit_batch_size: usize,
    /// Number of batches of the matching estimates.
    #[arg(long, default_value_t = 100)]
    num_batches: usize,
    /// Rows of the synthetic generator.
    #[arg(long, default_value_t = 4000)]
    n: usize,
    /// Features of the synthetic generator.
    #[arg(long, default_value_t = 5)]
    dim: usize,
    /// Distance between the synthetic group means.
    #[arg(long, default_value_t = 2.0)]
    shift: f64,
    #[arg(long, default_value_t = 2.0)]
    label_scale: f64,
    /// Label log-odds added for group 1 and removed for group 0.
    #[arg(long, default_value_t = 0.0)]
    group_effect: f64,
    /// Grid points per group for `grid`.
    #[arg(long, default_value_t = 512)]
    grid_size: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ftm,
    Reg,
    Unfair,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceArg {
    #[value(name = "0")]
    Group0,
    #[value(name = "1")]
    Group1,
    Alternate,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "ftm")]
    method: MethodArg,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Label-gap weight in the matching cost (0 matches on inputs only).
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Loss batch size [default: preset size, else 256].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Matching batch size [default: the loss batch size].
    #[arg(long)]
    match_batch_size: Option<usize>,
    #[arg(long, value_enum, default_value = "alternate")]
    source: SourceArg,
    /// Draw matching batches once per epoch instead of once per step.
    #[arg(long)]
    match_per_epoch: bool,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.95)]
    lr_decay: f64,
    /// Comma-separated hidden widths [default: two layers as wide as the input].
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Do not feed the sensitive attribute to the model.
    #[arg(long)]
    blind: bool,
}

const FALLBACK_BATCH: usize = 256;

fn dataset(common: &CommonArgs) -> ftm_cli::Result<DatasetSource> {
    let synthetic = SyntheticParams {
        n: common.n,
        dim: common.dim,
        shift: common.shift,
        label_scale: common.label_scale,
        group_effect: common.group_effect,
    };
    DatasetSource::parse(&common.dataset, common.schema.as_deref(), synthetic, common.grid_size)
}

fn train_config(args: Option<&TrainArgs>, source: &DatasetSource, seed: u64, tau: f64) -> TrainConfig {
    let Some(a) = args else {
        return TrainConfig {
            seed,
            tau,
            ..TrainConfig::default()
        };
    };
    let preset_batch = source.preset().and_then(TrainConfig::batch_size_for);
    let batch_size = a.batch_size.or(preset_batch).unwrap_or(FALLBACK_BATCH);
    TrainConfig {
        method: match a.method {
            MethodArg::Ftm => Method::Ftm,
            MethodArg::Reg => Method::Reg,
            MethodArg::Unfair => Method::Unfair,
        },
        lambda: a.lambda,
        alpha: a.alpha,
        epochs: a.epochs,
        batch_size,
        match_batch_size: a.match_batch_size.unwrap_or(batch_size),
        source_direction: match a.source {
            SourceArg::Group0 => SourceDirection::Group0,
            SourceArg::Group1 => SourceDirection::Group1,
            SourceArg::Alternate => SourceDirection::Alternate,
        },
        match_per_epoch: a.match_per_epoch,
        seed,
        lr: a.lr,
        lr_decay: a.lr_decay,
        hidden: a.hidden.clone(),
        include_sensitive: !a.blind,
        tau,
    }
}

fn build_spec(cli: Cli) -> ftm_cli::Result<RunSpec> {
    let (common, train, command) = match cli.command {
        Cmd::Train { common, train } => (common, Some(train), Command::Train),
        Cmd::Evaluate { common, checkpoint } => (common, None, Command::Evaluate { checkpoint }),
        Cmd::Sweep {
            common,
            train,
            lambdas,
            jobs,
        } => (
            common,
            Some(train),
            Command::Sweep {
                lambdas: lambdas.unwrap_or_else(|| FTM_LAMBDA_GRID.to_vec()),
                jobs,
            },
        ),
        Cmd::Audit {
            common,
            checkpoint,
            reference,
        } => (common, None, Command::Audit { checkpoint, reference }),
        Cmd::Subsets {
            common,
            checkpoint,
            num_subsets,
        } => (
            common,
            None,
            Command::Subsets {
                checkpoint,
                num_subsets,
            },
        ),
    };
    let source = dataset(&common)?;
    Ok(RunSpec {
        train: train_config(train.as_ref(), &source, common.seed, common.tau),
        command,
        dataset: source,
        split_ratio: common.split_ratio,
        minority_frac: common.minority_frac,
        eval: EvalSettings {
            tau: common.tau,
            tv_bins: common.tv_bins,
            match_batch_size: common.audit_batch_size,
            match_batches: common.num_batches,
        },
        out_dir: common.out,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match build_spec(cli).and_then(|spec| run(&spec).map(|()| spec.out_dir)) {
        Ok(out) => {
            log::info!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
