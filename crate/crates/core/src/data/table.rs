use std::path::Path;

use log::info;

use super::schema::{ColumnKind, Schema, SensitiveRule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

/// Typed rows restricted to the schema's feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<u8>,
    pub sensitive: Vec<u8>,
    /// Rows dropped because a used cell was missing.
    pub dropped: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            column_names: self.column_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
            dropped: 0,
        }
    }
}

/// Reads an RFC-4180 CSV with a header row and types it per `schema`.
///
/// Row numbers in errors are 1-based data rows (the header is row 0).
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .trim(csv::Trim::All)
        .from_path(path)?;
    read_table(reader, schema)
}

pub(crate) fn read_table<R: std::io::Read>(mut reader: csv::Reader<R>, schema: &Schema) -> Result<RawTable> {
    let headers = reader.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_pos: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| position(&c.name))
        .collect::<Result<_>>()?;
    let label_pos = position(&schema.label)?;
    let sens_pos = position(&schema.sensitive)?;
    let rule = schema.sensitive_rule()?;

    let mut table = RawTable {
        column_names: schema.columns.iter().map(|c| c.name.clone()).collect(),
        rows: Vec::new(),
        labels: Vec::new(),
        sensitive: Vec::new(),
        dropped: 0,
    };
    let is_missing = |v: &str| schema.missing.iter().any(|m| m == v);

    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = k + 1;
        let cell = |pos: usize, name: &str| {
            record.get(pos).ok_or_else(|| Error::ParseCell {
                row: row_no,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let used = feature_pos.iter().chain([&label_pos, &sens_pos]);
        let mut skip = false;
        for &p in used {
            if is_missing(record.get(p).unwrap_or("")) {
                skip = true;
                break;
            }
        }
        if skip {
            table.dropped += 1;
            continue;
        }

        let mut row = Vec::with_capacity(feature_pos.len());
        for (col, &p) in schema.columns.iter().zip(&feature_pos) {
            let raw = cell(p, &col.name)?;
            row.push(match col.kind {
                ColumnKind::Continuous => RawValue::Number(parse_number(raw, row_no, &col.name)?),
                ColumnKind::Categorical => RawValue::Category(raw.to_string()),
            });
        }
        let label_raw = cell(label_pos, &schema.label)?;
        let label = u8::from(schema.label_positive.iter().any(|v| v == label_raw));
        let sens_raw = cell(sens_pos, &schema.sensitive)?;
        let s = match &rule {
            SensitiveRule::Values(vals) => u8::from(vals.iter().any(|v| v == sens_raw)),
            SensitiveRule::AtLeast(t) => u8::from(parse_number(sens_raw, row_no, &schema.sensitive)? >= *t),
        };
        table.rows.push(row);
        table.labels.push(label);
        table.sensitive.push(s);
    }
    if table.dropped > 0 {
        info!("dropped {} rows with missing values", table.dropped);
    }
    Ok(table)
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::ParseCell {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::from_toml_str(
            r#"
            label = "y"
            label_positive = ["yes"]
            sensitive = "sex"
            sensitive_privileged = ["M"]
            missing = ["?"]
            [[columns]]
            name = "age"
            kind = "continuous"
            [[columns]]
            name = "city"
            kind = "categorical"
            "#,
        )
        .unwrap()
    }

    fn read(text: &str) -> Result<RawTable> {
        read_table(
            csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes()),
            &schema(),
        )
    }

    #[test]
    fn types_a_small_fixture() {
        let t = read("age,city,sex,y\n30,Oslo,M,yes\n41,Rome,F,no\n25,Oslo,F,yes\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(
            t.rows[1],
            vec![RawValue::Number(41.0), RawValue::Category("Rome".into())]
        );
        assert_eq!(t.labels, vec![1, 0, 1]);
        assert_eq!(t.sensitive, vec![1, 0, 0]);
    }

    #[test]
    fn quoted_fields_keep_commas() {
        let t = read("age,city,sex,y\n30,\"Washington, D.C.\",M,yes\n31,\"say \"\"hi\"\"\",F,no\n").unwrap();
        assert_eq!(t.rows[0][1], RawValue::Category("Washington, D.C.".into()));
        assert_eq!(t.rows[1][1], RawValue::Category("say \"hi\"".into()));
    }

    #[test]
    fn missing_column_is_named() {
        let err = read("age,town,sex,y\n30,Oslo,M,yes\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "city"), "{err}");
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let err = read("age,city,sex,y\n30,Oslo,M,yes\nabc,Rome,F,no\n").unwrap_err();
        match err {
            Error::ParseCell { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "age", "abc"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rows_with_missing_cells_are_dropped() {
        let t = read("age,city,sex,y\n30,?,M,yes\n41,Rome,F,no\n").unwrap();
        assert_eq!((t.len(), t.dropped), (1, 1));
    }
}
