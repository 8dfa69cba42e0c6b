use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Fixed one-hot vocabulary. When empty it is learned at fit time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// How raw sensitive-column values map to `s = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum SensitiveRule {
    /// Listed string values are group 1, everything else group 0.
    Values(Vec<String>),
    /// Numeric values `>= threshold` are group 1.
    AtLeast(f64),
}

/// Column roles and kinds for one CSV layout, read from TOML.
///
/// ```toml
/// label = "income"
/// label_positive = [">50K"]
/// sensitive = "sex"
/// sensitive_privileged = ["Male"]
/// missing = ["?"]
///
/// [[columns]]
/// name = "age"
/// kind = "continuous"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    /// Cell values treated as missing; rows containing one are dropped.
    #[serde(default)]
    pub missing: Vec<String>,
    pub label: String,
    pub label_positive: Vec<String>,
    pub sensitive: String,
    #[serde(default)]
    pub sensitive_privileged: Option<Vec<String>>,
    #[serde(default)]
    pub sensitive_min: Option<f64>,
    pub columns: Vec<ColumnSchema>,
}

fn default_delimiter() -> String {
    ",".to_string()
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Self = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        match self.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ => Err(Error::Schema(format!(
                "delimiter must be one byte, got {:?}",
                self.delimiter
            ))),
        }
    }

    pub fn sensitive_rule(&self) -> Result<SensitiveRule> {
        match (&self.sensitive_privileged, self.sensitive_min) {
            (Some(v), None) => Ok(SensitiveRule::Values(v.clone())),
            (None, Some(t)) => Ok(SensitiveRule::AtLeast(t)),
            _ => Err(Error::Schema(
                "exactly one of `sensitive_privileged` and `sensitive_min` must be set".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        self.delimiter_byte()?;
        self.sensitive_rule()?;
        if self.label_positive.is_empty() {
            return Err(Error::Schema("`label_positive` must list at least one value".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            if c.name == self.label {
                return Err(Error::Schema(format!("label column `{}` listed as a feature", c.name)));
            }
            if c.kind == ColumnKind::Continuous && !c.categories.is_empty() {
                return Err(Error::Schema(format!("continuous column `{}` has categories", c.name)));
            }
        }
        Ok(())
    }

    /// Expanded feature width, if every categorical vocabulary is declared.
    pub fn declared_width(&self) -> Option<usize> {
        self.columns
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Continuous => Some(1),
                ColumnKind::Categorical if c.categories.is_empty() => None,
                ColumnKind::Categorical => Some(c.categories.len()),
            })
            .sum()
    }
}

pub const PRESETS: [&str; 4] = ["adult", "german", "dutch", "bank"];

/// Built-in schema for one of the benchmark layouts in [`PRESETS`].
pub fn preset_schema(name: &str) -> Result<Schema> {
    let text = match name {
        "adult" => include_str!("../../presets/adult.toml"),
        "german" => include_str!("../../presets/german.toml"),
        "dutch" => include_str!("../../presets/dutch.toml"),
        "bank" => include_str!("../../presets/bank.toml"),
        other => return Err(Error::Schema(format!("unknown preset `{other}`"))),
    };
    Schema::from_toml_str(text)
}
