use std::path::Path;

use peerfed_core::preprocess::RawTable;

use crate::error::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: [&str; 3] = ["", "?", "NA"];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub label_column: String,
    pub positive_label: String,
    pub missing_tokens: Vec<String>,
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>, positive_label: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            positive_label: positive_label.into(),
            missing_tokens: DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Reads a headered CSV. Cells are trimmed before the missing-token check,
/// which also catches stray tabs in hand-edited files.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, path: &Path, schema: &CsvSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if !headers.contains(&schema.label_column) {
        return Err(Error::MissingLabelColumn {
            path: path.to_path_buf(),
            column: schema.label_column.clone(),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        rows.push(
            record
                .iter()
                .map(|cell| {
                    let cell = cell.trim();
                    (!schema.missing_tokens.iter().any(|t| t == cell)).then(|| cell.to_string())
                })
                .collect(),
        );
    }
    Ok(RawTable { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<RawTable> {
        read_csv(text.as_bytes(), Path::new("mem.csv"), &CsvSchema::new("y", "1"))
    }

    #[test]
    fn missing_tokens_become_none() {
        let t = read("a,b,y\n1,?,1\n NA ,\t2,0\n").unwrap();
        assert_eq!(t.headers, ["a", "b", "y"]);
        assert_eq!(t.rows[0], [Some("1".into()), None, Some("1".into())]);
        assert_eq!(t.rows[1], [None, Some("2".into()), Some("0".into())]);
    }

    #[test]
    fn ragged_row_reports_line() {
        match read("a,y\n1,0\n2,1,3\n").unwrap_err() {
            Error::Csv { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn label_column_required() {
        assert!(matches!(
            read("a,b\n1,2\n").unwrap_err(),
            Error::MissingLabelColumn { .. }
        ));
    }
}
