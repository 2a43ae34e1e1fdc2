//! Per-cell results table: one row per participant plus a trailing `Avg` row.

use std::fmt::Write as _;
use std::str::FromStr;

use peerfed_core::aggregation::StrategyId;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Plain,
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Plain => "txt",
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        [Format::Plain, Format::Csv, Format::Markdown]
            .into_iter()
            .find(|f| f.extension() == ext)
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" | "txt" => Ok(Format::Plain),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub part: u32,
    /// Share of all rows, in [0, 1].
    pub size: f64,
    /// Share of positive labels, in [0, 1].
    pub positive_rate: f64,
    pub local: f64,
    /// One value per entry of [`ResultsTable::strategies`].
    pub federated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub strategies: Vec<StrategyId>,
    pub rows: Vec<ParticipantRow>,
}

/// Column means of the participant rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgRow {
    pub size: f64,
    pub positive_rate: f64,
    pub local: f64,
    pub federated: Vec<f64>,
}

const FIXED_COLUMNS: [&str; 4] = ["Part", "Size", "Pos(%)", "Acc(local)"];
const AVG_LABEL: &str = "Avg";

/// Rounds the way the emitted tables do.
pub fn round4(x: f64) -> f64 {
    format!("{x:.4}").parse().expect("formatted float parses")
}

fn percent(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn parse_percent(cell: &str) -> Result<f64> {
    let digits = cell
        .strip_suffix('%')
        .ok_or_else(|| Error::TableParse(format!("expected a percentage, got `{cell}`")))?;
    parse_num(digits).map(|v| v / 100.0)
}

fn parse_num(cell: &str) -> Result<f64> {
    cell.trim()
        .parse()
        .map_err(|_| Error::TableParse(format!("not a number: `{cell}`")))
}

impl ResultsTable {
    pub fn headers(&self) -> Vec<String> {
        FIXED_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.strategies.iter().map(|s| s.column_label().to_string()))
            .collect()
    }

    pub fn avg(&self) -> AvgRow {
        let n = self.rows.len() as f64;
        let col = |f: &dyn Fn(&ParticipantRow) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
        AvgRow {
            size: col(&|r| r.size),
            positive_rate: col(&|r| r.positive_rate),
            local: col(&|r| r.local),
            federated: (0..self.strategies.len())
                .map(|j| col(&|r| r.federated[j]))
                .collect(),
        }
    }

    /// Rendered cells, participant rows first, `Avg` last.
    pub fn cells(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.part.to_string(),
                    percent(r.size),
                    percent(r.positive_rate),
                    format!("{:.4}", r.local),
                ];
                row.extend(r.federated.iter().map(|v| format!("{v:.4}")));
                row
            })
            .collect();
        let avg = self.avg();
        let mut row = vec![
            AVG_LABEL.to_string(),
            percent(avg.size),
            percent(avg.positive_rate),
            format!("{:.4}", avg.local),
        ];
        row.extend(avg.federated.iter().map(|v| format!("{v:.4}")));
        out.push(row);
        out
    }

    pub fn emit(&self, format: Format) -> String {
        let headers = self.headers();
        let cells = self.cells();
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&headers).expect("in-memory write");
                for row in &cells {
                    w.write_record(row).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
            }
            Format::Markdown => {
                let mut s = String::new();
                let _ = writeln!(s, "| {} |", headers.join(" | "));
                let rule: Vec<&str> = headers.iter().map(|_| "---:").collect();
                let _ = writeln!(s, "|{}|", rule.join("|"));
                for row in &cells {
                    let _ = writeln!(s, "| {} |", row.join(" | "));
                }
                s
            }
            Format::Plain => {
                let widths: Vec<usize> = (0..headers.len())
                    .map(|j| {
                        cells
                            .iter()
                            .map(|r| r[j].len())
                            .chain([headers[j].len()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let mut s = String::new();
                let line = |s: &mut String, row: &[String]| {
                    let padded: Vec<String> = row
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect();
                    let _ = writeln!(s, "{}", padded.join("  "));
                };
                line(&mut s, &headers);
                for row in &cells {
                    line(&mut s, row);
                }
                s
            }
        }
    }

    /// Parses emitted text back. Values come back rounded as printed.
    pub fn parse(text: &str, format: Format) -> Result<ParsedTable> {
        let records: Vec<Vec<String>> = match format {
            Format::Csv => {
                let mut rdr = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .from_reader(text.as_bytes());
                rdr.records()
                    .map(|r| {
                        r.map(|r| r.iter().map(str::to_string).collect())
                            .map_err(|e| Error::TableParse(e.to_string()))
                    })
                    .collect::<Result<_>>()?
            }
            Format::Markdown => text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .filter(|(i, _)| *i != 1)
                .map(|(_, l)| {
                    l.trim()
                        .trim_matches('|')
                        .split('|')
                        .map(|c| c.trim().to_string())
                        .collect()
                })
                .collect(),
            Format::Plain => text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    l.trim()
                        .split("  ")
                        .map(str::trim)
                        .filter(|c| !c.is_empty())
                        .map(str::to_string)
                        .collect()
                })
                .collect(),
        };
        ParsedTable::from_records(records)
    }
}

/// A table read back from disk, including its printed `Avg` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub table: ResultsTable,
    pub avg: AvgRow,
}

impl ParsedTable {
    fn from_records(records: Vec<Vec<String>>) -> Result<Self> {
        let (header, body) = records
            .split_first()
            .ok_or_else(|| Error::TableParse("empty table".into()))?;
        if header.len() < FIXED_COLUMNS.len() || header[..4] != FIXED_COLUMNS {
            return Err(Error::TableParse(format!("unexpected header {header:?}")));
        }
        let strategies = header[4..]
            .iter()
            .map(|h| {
                StrategyId::from_column_label(h)
                    .ok_or_else(|| Error::TableParse(format!("unknown column `{h}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let (avg_row, rows) = body
            .split_last()
            .ok_or_else(|| Error::TableParse("no rows".into()))?;
        if avg_row.first().map(String::as_str) != Some(AVG_LABEL) {
            return Err(Error::TableParse("last row is not Avg".into()));
        }
        for r in body {
            if r.len() != header.len() {
                return Err(Error::TableParse(format!("row {r:?} has wrong width")));
            }
        }
        let nums = |r: &[String]| r[4..].iter().map(|c| parse_num(c)).collect::<Result<Vec<_>>>();
        let rows = rows
            .iter()
            .map(|r| {
                Ok(ParticipantRow {
                    part: r[0]
                        .parse()
                        .map_err(|_| Error::TableParse(format!("bad participant `{}`", r[0])))?,
                    size: parse_percent(&r[1])?,
                    positive_rate: parse_percent(&r[2])?,
                    local: parse_num(&r[3])?,
                    federated: nums(r)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let avg = AvgRow {
            size: parse_percent(&avg_row[1])?,
            positive_rate: parse_percent(&avg_row[2])?,
            local: parse_num(&avg_row[3])?,
            federated: nums(avg_row)?,
        };
        Ok(Self {
            table: ResultsTable { strategies, rows },
            avg,
        })
    }
}
