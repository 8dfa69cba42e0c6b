use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Schema};
use super::table::{RawTable, RawValue};
use super::{ColumnSpec, Dataset};
use crate::error::{Error, Result};

/// Min-max and one-hot parameters fitted on a training table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub columns: Vec<ColumnSpec>,
    /// `(min, max)` per column; unused for categorical columns.
    pub ranges: Vec<(f64, f64)>,
    pub provenance: String,
}

impl Preprocessor {
    /// Fits scaling ranges on `train`. Categorical vocabularies come from the
    /// schema when declared, otherwise from the sorted values seen in `train`.
    pub fn fit(train: &RawTable, schema: &Schema) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training table"));
        }
        let mut columns = Vec::with_capacity(schema.columns.len());
        let mut ranges = Vec::with_capacity(schema.columns.len());
        for (k, col) in schema.columns.iter().enumerate() {
            match col.kind {
                ColumnKind::Continuous => {
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for row in &train.rows {
                        if let RawValue::Number(v) = row[k] {
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    ranges.push((lo, hi));
                    columns.push(ColumnSpec {
                        name: col.name.clone(),
                        kind: ColumnKind::Continuous,
                        categories: Vec::new(),
                    });
                }
                ColumnKind::Categorical => {
                    let categories = if col.categories.is_empty() {
                        observed_categories(train, k)
                    } else {
                        col.categories.clone()
                    };
                    ranges.push((0.0, 0.0));
                    columns.push(ColumnSpec {
                        name: col.name.clone(),
                        kind: ColumnKind::Categorical,
                        categories,
                    });
                }
            }
        }
        Ok(Self {
            columns,
            ranges,
            provenance: schema.name.clone().unwrap_or_else(|| "csv".to_string()),
        })
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(ColumnSpec::width).sum()
    }

    /// Applies the fitted parameters. A constant training column maps to 0;
    /// a category outside the vocabulary is an error.
    pub fn transform(&self, raw: &RawTable) -> Result<Dataset> {
        let dim = self.width();
        let mut features = Vec::with_capacity(raw.len() * dim);
        for row in &raw.rows {
            for ((col, &(lo, hi)), value) in self.columns.iter().zip(&self.ranges).zip(row) {
                match (col.kind, value) {
                    (ColumnKind::Continuous, RawValue::Number(v)) => {
                        let span = hi - lo;
                        features.push(if span > 0.0 { (v - lo) / span } else { 0.0 });
                    }
                    (ColumnKind::Categorical, RawValue::Category(v)) => {
                        let hit = col
                            .categories
                            .iter()
                            .position(|c| c == v)
                            .ok_or_else(|| Error::UnseenCategory {
                                column: col.name.clone(),
                                value: v.clone(),
                            })?;
                        features.extend((0..col.categories.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                    }
                    _ => return Err(Error::Schema(format!("column `{}` has a mistyped value", col.name))),
                }
            }
        }
        Dataset::new(
            features,
            dim,
            raw.labels.clone(),
            raw.sensitive.clone(),
            self.columns.clone(),
            self.provenance.clone(),
        )
    }
}

fn observed_categories(table: &RawTable, k: usize) -> Vec<String> {
    let set: BTreeSet<&str> = table
        .rows
        .iter()
        .filter_map(|r| match &r[k] {
            RawValue::Category(c) => Some(c.as_str()),
            RawValue::Number(_) => None,
        })
        .collect();
    set.into_iter().map(str::to_string).collect()
}

impl Schema {
    /// Copy of the schema with every undeclared vocabulary filled from
    /// `table`. Only category names are read; no statistics are fitted.
    pub fn with_observed_categories(&self, table: &RawTable) -> Schema {
        let mut out = self.clone();
        for (k, col) in out.columns.iter_mut().enumerate() {
            if col.kind == ColumnKind::Categorical && col.categories.is_empty() {
                col.categories = observed_categories(table, k);
            }
        }
        out
    }
}

/// Fits on `train` and transforms both tables.
pub fn preprocess(train: &RawTable, test: &RawTable, schema: &Schema) -> Result<(Dataset, Dataset)> {
    let pre = Preprocessor::fit(train, schema)?;
    Ok((pre.transform(train)?, pre.transform(test)?))
}
