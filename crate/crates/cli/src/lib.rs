//! Command-line workflows for fairness-through-matching: train, evaluate,
//! sweep, audit and subset audits, each writing reproducible JSON/CSV
//! artifacts plus a `meta.json` sidecar holding timing information.

pub mod commands;
pub mod error;
pub mod source;

pub use commands::{
    cmd_audit, cmd_evaluate, cmd_subsets, cmd_sweep, cmd_train, run, AuditReport, Command, EvalSettings, RunReport,
    RunSpec, SubsetOutput, SubsetSummary, SweepRow, TrainOutput,
};
pub use error::{CliError, Result};
pub use source::{DatasetSource, LoadedModel, Splits, SyntheticParams};
