//! Dataset and model sources named on the command line.

use std::path::{Path, PathBuf};

use ftm_core::data::{self, load_csv, make_imbalanced, preprocess, preset_schema, split, Dataset, Schema, PRESETS};
use ftm_core::model::{Mlp, Scorer};
use ftm_core::seed::derive_seed;
use ftm_core::synthetic::{grid_dataset, make_synthetic_classification, LabelRule, StepModel};

use crate::error::{CliError, Result};

/// Shifted-Gaussian generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub n: usize,
    pub dim: usize,
    pub shift: f64,
    pub label_scale: f64,
    pub group_effect: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n: 4000,
            dim: 5,
            shift: 2.0,
            label_scale: 2.0,
            group_effect: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticParams),
    /// Uniform midpoint grid used by the step-model audits; train and test
    /// are the same grid.
    Grid {
        per_group: usize,
    },
    Csv {
        path: PathBuf,
        schema: String,
    },
    /// A dataset previously written with `Dataset::save_json`.
    Cached(PathBuf),
}

impl DatasetSource {
    /// `synthetic`, `grid`, a `.json` dataset cache, or a CSV path
    /// (which needs `schema`: a preset name or a schema file).
    pub fn parse(value: &str, schema: Option<&str>, synthetic: SyntheticParams, grid_size: usize) -> Result<Self> {
        match value {
            "synthetic" => Ok(Self::Synthetic(synthetic)),
            "grid" => Ok(Self::Grid { per_group: grid_size }),
            _ if value.ends_with(".json") => Ok(Self::Cached(PathBuf::from(value))),
            _ => match schema {
                Some(s) => Ok(Self::Csv {
                    path: PathBuf::from(value),
                    schema: s.to_string(),
                }),
                None if PRESETS.contains(&value) => Err(CliError::Usage(format!(
                    "`{value}` is a schema preset; pass the CSV path with --dataset and `--schema {value}`"
                ))),
                None => Err(CliError::Usage(format!("--schema is required for CSV input `{value}`"))),
            },
        }
    }

    /// Preset name when the source is a CSV read with a built-in schema.
    pub fn preset(&self) -> Option<&str> {
        match self {
            Self::Csv { schema, .. } if PRESETS.contains(&schema.as_str()) => Some(schema),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Synthetic(p) => format!(
                "synthetic(n={}, dim={}, shift={}, label_scale={}, group_effect={})",
                p.n, p.dim, p.shift, p.label_scale, p.group_effect
            ),
            Self::Grid { per_group } => format!("grid({per_group} per group)"),
            Self::Csv { path, schema } => format!("{} [schema {schema}]", path.display()),
            Self::Cached(p) => p.display().to_string(),
        }
    }

    /// Loads and splits the data. Sub-seeds are derived from `seed`.
    pub fn load(&self, split_ratio: f64, minority_frac: Option<f64>, seed: u64) -> Result<Splits> {
        let split_seed = derive_seed(seed, "split", 0);
        let (train, test) = match self {
            Self::Synthetic(p) => {
                let rule = LabelRule {
                    group_effect: p.group_effect,
                    ..LabelRule::aligned(p.dim, p.label_scale)
                };
                let data = make_synthetic_classification(p.n, p.dim, p.shift, &rule, derive_seed(seed, "data", 0))?;
                split(&data, split_ratio, split_seed)?
            }
            Self::Grid { per_group } => {
                let g = grid_dataset(*per_group)?;
                (g.clone(), g)
            }
            Self::Csv { path, schema } => {
                let schema = load_schema(schema)?;
                let raw = load_csv(path, &schema)?;
                let (tr, te) = data::split_indices(raw.len(), split_ratio, split_seed)?;
                preprocess(&raw.select(&tr), &raw.select(&te), &schema)?
            }
            Self::Cached(path) => split(&Dataset::load_json(path)?, split_ratio, split_seed)?,
        };
        let train = match minority_frac {
            Some(f) => make_imbalanced(&train, f, derive_seed(seed, "imbalance", 0))?,
            None => train,
        };
        Ok(Splits { train, test })
    }
}

fn load_schema(name: &str) -> Result<Schema> {
    if PRESETS.contains(&name) {
        Ok(preset_schema(name)?)
    } else {
        Ok(Schema::from_file(Path::new(name))?)
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
}

/// A trained checkpoint or one of the two built-in step models.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedModel {
    Mlp(Mlp),
    Step(StepModel),
}

impl LoadedModel {
    /// `builtin:f_hat`, `builtin:f_tilde`, or a checkpoint path.
    pub fn load(reference: &str) -> Result<Self> {
        match reference {
            "builtin:f_hat" => Ok(Self::Step(StepModel::Hat)),
            "builtin:f_tilde" => Ok(Self::Step(StepModel::Tilde)),
            r if r.starts_with("builtin:") => Err(CliError::Usage(format!(
                "unknown built-in model `{r}` (expected builtin:f_hat or builtin:f_tilde)"
            ))),
            path => Ok(Self::Mlp(Mlp::load_json(Path::new(path))?)),
        }
    }

    pub fn analytic_transport_cost(&self) -> Option<f64> {
        match self {
            Self::Step(m) => Some(m.analytic_transport_cost()),
            Self::Mlp(_) => None,
        }
    }
}

impl Scorer for LoadedModel {
    fn input_dim(&self) -> usize {
        match self {
            Self::Mlp(m) => m.input_dim(),
            Self::Step(m) => m.input_dim(),
        }
    }

    fn score(&self, x: &[f64], s: u8) -> f64 {
        match self {
            Self::Mlp(m) => m.score(x, s),
            Self::Step(m) => m.score(x, s),
        }
    }
}
