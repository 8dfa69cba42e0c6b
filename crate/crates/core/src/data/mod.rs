//! Tabular datasets: schema-driven CSV ingestion, train-fitted min-max
//! scaling and one-hot encoding, seeded splits and group rebalancing.

mod preprocess;
mod schema;
mod table;

pub use preprocess::{preprocess, Preprocessor};
pub use schema::{preset_schema, ColumnKind, ColumnSchema, Schema, SensitiveRule, PRESETS};
pub use table::{load_csv, RawTable, RawValue};

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// One original column after preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// One-hot order for categorical columns; empty for continuous ones.
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn width(&self) -> usize {
        match self.kind {
            ColumnKind::Continuous => 1,
            ColumnKind::Categorical => self.categories.len(),
        }
    }
}

/// Feature matrix with binary labels and a binary sensitive attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
    sensitive: Vec<u8>,
    pub columns: Vec<ColumnSpec>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<u8>,
        sensitive: Vec<u8>,
        columns: Vec<ColumnSpec>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if sensitive.len() != n {
            return Err(Error::SizeMismatch {
                left: n,
                right: sensitive.len(),
            });
        }
        if features.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                got: features.len(),
            });
        }
        if labels.iter().chain(&sensitive).any(|&v| v > 1) {
            return Err(Error::InvalidArgument(
                "labels and sensitive values must be 0 or 1".into(),
            ));
        }
        let width: usize = columns.iter().map(ColumnSpec::width).sum();
        if !columns.is_empty() && width != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: width,
            });
        }
        Ok(Self {
            features,
            dim,
            labels,
            sensitive,
            columns,
            provenance: provenance.into(),
        })
    }

    /// Builds a dataset from row vectors with anonymous continuous columns.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>, sensitive: Vec<u8>, provenance: &str) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            features.extend_from_slice(r);
        }
        let columns = (0..dim)
            .map(|k| ColumnSpec {
                name: format!("x{k}"),
                kind: ColumnKind::Continuous,
                categories: Vec::new(),
            })
            .collect();
        Self::new(features, dim, labels, sensitive, columns, provenance)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks(self.dim.max(1)).take(self.len())
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Row indices with sensitive attribute `s`, in order.
    pub fn group_indices(&self, s: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.sensitive[i] == s).collect()
    }

    pub fn group_sizes(&self) -> [usize; 2] {
        let n1 = self.sensitive.iter().filter(|&&s| s == 1).count();
        [self.len() - n1, n1]
    }

    /// New dataset made of the given rows (duplicates allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
            columns: self.columns.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Writes the canonical JSON cache.
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let data: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::new(
            data.features,
            data.dim,
            data.labels,
            data.sensitive,
            data.columns,
            data.provenance,
        )
    }
}

/// Seeded shuffle of `0..n`, cut at `floor(n * ratio)`.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::stream(seed, "split", 0));
    let cut = (n as f64 * ratio).floor() as usize;
    let test = idx.split_off(cut);
    Ok((idx, test))
}

/// Train/test split; `ratio` is the training share (0.8 for an 8:2 split).
pub fn split(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.len(), ratio, seed)?;
    Ok((data.select(&train), data.select(&test)))
}

/// Subsamples group 0 so it makes up `minority_frac` of the result, keeping
/// every group-1 row.
pub fn make_imbalanced(train: &Dataset, minority_frac: f64, seed: u64) -> Result<Dataset> {
    if !(minority_frac > 0.0 && minority_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "minority fraction must be in (0, 1), got {minority_frac}"
        )));
    }
    let mut g0 = train.group_indices(0);
    let g1 = train.group_indices(1);
    let target = (minority_frac * g1.len() as f64 / (1.0 - minority_frac)).round() as usize;
    let keep = target.clamp(1, g0.len().max(1)).min(g0.len());
    g0.shuffle(&mut seed::stream(seed, "imbalance", 0));
    g0.truncate(keep);
    let mut rows: Vec<usize> = g0.into_iter().chain(g1).collect();
    rows.sort_unstable();
    Ok(train.select(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        let sens = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        Dataset::from_rows(&rows, labels, sens, "toy").unwrap()
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let (a, b) = split_indices(103, 0.8, 9).unwrap();
        assert_eq!(a.len(), 82);
        assert_eq!(b.len(), 21);
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert_eq!(split_indices(103, 0.8, 9).unwrap(), (a, b));
        assert_ne!(
            split_indices(103, 0.8, 10).unwrap().0,
            split_indices(103, 0.8, 9).unwrap().0
        );
    }

    #[test]
    fn split_datasets_are_disjoint() {
        let d = toy(50);
        let (tr, te) = split(&d, 0.8, 1).unwrap();
        assert_eq!(tr.len() + te.len(), 50);
        let mut xs: Vec<f64> = tr.rows().chain(te.rows()).map(|r| r[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, (0..50).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn imbalance_hits_target_ratio() {
        let d = toy(3000);
        let out = make_imbalanced(&d, 0.05, 4).unwrap();
        let [n0, n1] = out.group_sizes();
        assert_eq!(n1, d.group_sizes()[1]);
        let target = 0.05 * n1 as f64 / 0.95;
        assert!((n0 as f64 - target).abs() <= 1.0);
    }

    #[test]
    fn imbalance_at_original_share_keeps_everything() {
        let d = toy(300);
        let [n0, n1] = d.group_sizes();
        let frac = n0 as f64 / (n0 + n1) as f64;
        let out = make_imbalanced(&d, frac, 4).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn rejects_non_binary_labels() {
        assert!(Dataset::from_rows(&[vec![0.0]], vec![2], vec![0], "bad").is_err());
    }

    #[test]
    fn json_cache_round_trip() {
        let d = toy(10);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        d.save_json(&p).unwrap();
        assert_eq!(Dataset::load_json(&p).unwrap(), d);
    }
}
