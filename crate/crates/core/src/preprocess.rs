//! Raw tabular data to a clean, standardized [`Dataset`].
//!
//! Numeric columns get median imputation, text columns mode imputation and
//! binary or one-hot encoding. Constant columns are dropped. Every surviving
//! column is z-scored with population statistics of the whole table.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Header plus rows of optional cells; `None` is a missing value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub label_column: String,
    /// Label cell value mapped to class 1; every other value is class 0.
    pub positive_label: String,
    /// Identifier or other non-feature columns.
    pub drop_columns: Vec<String>,
    pub standardize: bool,
}

impl Policy {
    pub fn new(label_column: impl Into<String>, positive_label: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            positive_label: positive_label.into(),
            drop_columns: Vec::new(),
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnAction {
    Numeric { imputed: usize },
    Binary { imputed: usize, positive_level: String },
    OneHot { imputed: usize, levels: Vec<String> },
    DroppedConstant,
    DroppedByPolicy,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreprocessReport {
    pub rows: usize,
    pub positives: usize,
    pub columns: Vec<(String, ColumnAction)>,
    pub feature_count: usize,
}

impl PreprocessReport {
    pub fn dropped_constant(&self) -> impl Iterator<Item = &str> {
        self.columns
            .iter()
            .filter(|(_, a)| *a == ColumnAction::DroppedConstant)
            .map(|(n, _)| n.as_str())
    }

    /// One line per fact, stable order.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.columns.len() + 3);
        out.push(format!("rows {}", self.rows));
        out.push(format!("positives {}", self.positives));
        out.push(format!("features {}", self.feature_count));
        for (name, action) in &self.columns {
            let line = match action {
                ColumnAction::Numeric { imputed } => {
                    format!("column {name} numeric imputed={imputed}")
                }
                ColumnAction::Binary {
                    imputed,
                    positive_level,
                } => format!("column {name} binary imputed={imputed} one={positive_level}"),
                ColumnAction::OneHot { imputed, levels } => {
                    format!("column {name} one-hot imputed={imputed} levels={}", levels.join("|"))
                }
                ColumnAction::DroppedConstant => format!("column {name} dropped constant"),
                ColumnAction::DroppedByPolicy => format!("column {name} dropped by policy"),
            };
            out.push(line);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub dataset: Dataset,
    pub report: PreprocessReport,
}

/// Median of a non-empty slice; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Replace missing entries with the median of the present ones.
pub fn impute_median(column: &[Option<f64>]) -> Option<Vec<f64>> {
    let present: Vec<f64> = column.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let m = median(&present);
    Some(column.iter().map(|v| v.unwrap_or(m)).collect())
}

fn parse_numeric(cells: &[Option<&str>]) -> Option<Vec<Option<f64>>> {
    cells
        .iter()
        .map(|c| match c {
            None => Some(None),
            Some(s) => s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some),
        })
        .collect()
}

struct Encoded {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    action: ColumnAction,
}

fn encode_column(name: &str, cells: &[Option<&str>]) -> Result<Encoded> {
    let imputed = cells.iter().filter(|c| c.is_none()).count();
    if imputed == cells.len() {
        return Err(Error::ColumnEntirelyMissing(name.to_string()));
    }
    if let Some(numeric) = parse_numeric(cells) {
        let values = impute_median(&numeric).ok_or_else(|| Error::ColumnEntirelyMissing(name.to_string()))?;
        let first = values[0];
        if values.iter().all(|&v| v == first) {
            return Ok(Encoded {
                names: Vec::new(),
                columns: Vec::new(),
                action: ColumnAction::DroppedConstant,
            });
        }
        return Ok(Encoded {
            names: alloc::vec![name.to_string()],
            columns: alloc::vec![values],
            action: ColumnAction::Numeric { imputed },
        });
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in cells.iter().flatten() {
        *counts.entry(c).or_default() += 1;
    }
    // Highest count wins; BTreeMap order breaks ties toward the smallest level.
    let mode = counts
        .iter()
        .fold(("", 0usize), |best, (&k, &v)| if v > best.1 { (k, v) } else { best })
        .0;
    let filled: Vec<&str> = cells.iter().map(|c| c.unwrap_or(mode)).collect();
    let levels: Vec<&str> = counts.keys().copied().collect();
    match levels.len() {
        1 => Ok(Encoded {
            names: Vec::new(),
            columns: Vec::new(),
            action: ColumnAction::DroppedConstant,
        }),
        2 => {
            let one = levels[1];
            Ok(Encoded {
                names: alloc::vec![format!("{name}={one}")],
                columns: alloc::vec![filled.iter().map(|&v| f64::from(u8::from(v == one))).collect()],
                action: ColumnAction::Binary {
                    imputed,
                    positive_level: one.to_string(),
                },
            })
        }
        _ => Ok(Encoded {
            names: levels.iter().map(|l| format!("{name}={l}")).collect(),
            columns: levels
                .iter()
                .map(|&l| filled.iter().map(|&v| f64::from(u8::from(v == l))).collect())
                .collect(),
            action: ColumnAction::OneHot {
                imputed,
                levels: levels.iter().map(|l| l.to_string()).collect(),
            },
        }),
    }
}

pub fn preprocess(table: &RawTable, policy: &Policy) -> Result<Preprocessed> {
    let label_idx = table
        .column_index(&policy.label_column)
        .ok_or_else(|| Error::MissingLabelColumn(policy.label_column.clone()))?;
    if table.is_empty() {
        return Err(Error::Empty("table"));
    }
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.headers.len() {
            return Err(Error::LengthMismatch {
                expected: table.headers.len(),
                actual: row.len(),
            });
        }
        if row[label_idx].is_none() {
            return Err(Error::MissingLabel { row: r });
        }
    }
    let labels: Vec<u8> = table
        .rows
        .iter()
        .map(|row| u8::from(row[label_idx].as_deref() == Some(policy.positive_label.as_str())))
        .collect();

    let mut report = PreprocessReport {
        rows: table.len(),
        positives: labels.iter().filter(|&&y| y == 1).count(),
        ..PreprocessReport::default()
    };
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (c, header) in table.headers.iter().enumerate() {
        if c == label_idx {
            continue;
        }
        if policy.drop_columns.iter().any(|d| d == header) {
            report
                .columns
                .push((header.clone(), ColumnAction::DroppedByPolicy));
            continue;
        }
        let cells: Vec<Option<&str>> = table.rows.iter().map(|row| row[c].as_deref()).collect();
        let encoded = encode_column(header, &cells)?;
        names.extend(encoded.names);
        columns.extend(encoded.columns);
        report.columns.push((header.clone(), encoded.action));
    }
    if columns.is_empty() {
        return Err(Error::NoFeatures);
    }
    report.feature_count = columns.len();

    let rows = table.len();
    let mut data = Vec::with_capacity(rows * columns.len());
    for r in 0..rows {
        data.extend(columns.iter().map(|col| col[r]));
    }
    let features = Matrix::from_vec(rows, columns.len(), data)?;
    let mut dataset = Dataset::new(features, labels, names)?;
    if policy.standardize {
        dataset.standardize();
    }
    Ok(Preprocessed { dataset, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::column_moments;
    use alloc::vec;

    fn cell(s: &str) -> Option<String> {
        if s == "?" {
            None
        } else {
            Some(s.to_string())
        }
    }

    fn table(headers: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|c| cell(c)).collect())
                .collect(),
        }
    }

    #[test]
    fn median_imputation() {
        let col = [Some(1.0), Some(2.0), None, Some(3.0)];
        assert_eq!(impute_median(&col).unwrap(), vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(impute_median(&[None, None]).is_none());
    }

    #[test]
    fn encodes_and_standardizes() {
        let t = table(
            &["id", "age", "sex", "color", "const", "y"],
            &[
                &["1", "30", "m", "red", "7", "yes"],
                &["2", "?", "f", "blue", "7", "no"],
                &["3", "50", "?", "green", "7", "yes"],
                &["4", "40", "m", "red", "7", "no"],
            ],
        );
        let mut policy = Policy::new("y", "yes");
        policy.drop_columns.push("id".into());
        let out = preprocess(&t, &policy).unwrap();
        let d = &out.dataset;
        assert_eq!(d.labels, vec![1, 0, 1, 0]);
        assert_eq!(
            d.feature_names,
            vec!["age", "sex=m", "color=blue", "color=green", "color=red"]
        );
        assert_eq!(out.report.dropped_constant().collect::<Vec<_>>(), vec!["const"]);
        let (means, stds) = column_moments(&d.features);
        for (m, s) in means.iter().zip(&stds) {
            assert!(m.abs() < 1e-9);
            assert!((s - 1.0).abs() < 1e-6);
        }
        assert!(d.features.as_slice().iter().all(|v| v.is_finite()));
        assert!(out.report.lines().iter().any(|l| l == "column const dropped constant"));
    }

    #[test]
    fn unstandardized_keeps_raw_values() {
        let t = table(&["a", "b", "y"], &[&["1", "x", "1"], &["?", "z", "0"], &["3", "?", "1"]]);
        let mut policy = Policy::new("y", "1");
        policy.standardize = false;
        let d = preprocess(&t, &policy).unwrap().dataset;
        // median of {1, 3} is 2; the mode tie between x and z goes to x
        assert_eq!(d.features.column(0).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        assert_eq!(d.features.column(1).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn error_paths() {
        let t = table(&["a", "y"], &[&["?", "1"], &["?", "0"]]);
        assert_eq!(
            preprocess(&t, &Policy::new("y", "1")).unwrap_err(),
            Error::ColumnEntirelyMissing("a".into())
        );
        assert_eq!(
            preprocess(&t, &Policy::new("label", "1")).unwrap_err(),
            Error::MissingLabelColumn("label".into())
        );
        let t = table(&["a", "y"], &[&["1", "1"], &["1", "0"]]);
        assert_eq!(preprocess(&t, &Policy::new("y", "1")).unwrap_err(), Error::NoFeatures);
        let t = table(&["a", "y"], &[&["1", "?"], &["2", "0"]]);
        assert_eq!(
            preprocess(&t, &Policy::new("y", "1")).unwrap_err(),
            Error::MissingLabel { row: 0 }
        );
    }
}
