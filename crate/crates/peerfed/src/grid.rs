//! Experiment grid: datasets × splits × seeds, every strategy per cell.

use std::path::{Path, PathBuf};

use log::{info, warn};
use peerfed_core::aggregation::StrategyId;
use peerfed_core::partition::partition;
use peerfed_core::{run_federation, Dataset, Executor, FederationSettings, RoundRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::parallel::Parallel;
use crate::summary::{CellAverages, CellKey, Summary};
use crate::table::{Format, ParticipantRow, ResultsTable};

pub const SUMMARY_FILE: &str = "summary.txt";
pub const FAILURES_FILE: &str = "failures.txt";

#[derive(Debug, Clone)]
pub struct CellRun {
    pub key: CellKey,
    pub table: ResultsTable,
    pub histories: Vec<(StrategyId, Vec<RoundRecord>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub key: CellKey,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub cells: Vec<CellRun>,
    pub failures: Vec<CellFailure>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    pub format: Format,
    /// Write tables, histories and the summary to the output directory.
    pub write: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            jobs: None,
            format: Format::Plain,
            write: true,
        }
    }
}

/// Runs every configured strategy on one (dataset, split, seed) cell. All
/// strategies see the same partitions, initial model and round-1 training,
/// so the local column is shared.
pub fn run_cell<E: Executor>(
    dataset: &Dataset,
    key: CellKey,
    split: SplitSpec,
    config: &ExperimentConfig,
    executor: &E,
) -> Result<CellRun> {
    let scheme = split.scheme(config.participants, key.seed);
    let parts = partition(dataset, &scheme, &config.partition)?;
    let topology = config.topology(dataset.feature_count())?;
    let mut rows: Vec<ParticipantRow> = parts
        .iter()
        .map(|p| ParticipantRow {
            part: p.participant_id,
            size: p.size_fraction,
            positive_rate: p.positive_rate,
            local: f64::NAN,
            federated: Vec::with_capacity(config.strategies.len()),
        })
        .collect();
    let mut histories = Vec::with_capacity(config.strategies.len());
    for &strategy in &config.strategies {
        let settings = FederationSettings {
            topology: topology.clone(),
            training: config.training,
            strategy,
            aggregation: config.aggregation,
        };
        let outcome = run_federation(
            parts.clone(),
            &settings,
            &config.termination,
            key.seed,
            executor,
        )?;
        for (row, (&local, &fed)) in rows
            .iter_mut()
            .zip(outcome.baseline_accuracy.iter().zip(&outcome.final_accuracy))
        {
            row.local = local;
            row.federated.push(fed);
        }
        histories.push((strategy, outcome.history));
    }
    Ok(CellRun {
        key,
        table: ResultsTable {
            strategies: config.strategies.clone(),
            rows,
        },
        histories,
    })
}

#[derive(Serialize)]
struct HistoryLine<'a> {
    dataset: &'a str,
    split: &'a str,
    seed: u64,
    #[serde(flatten)]
    record: &'a RoundRecord,
}

/// One JSON object per round, strategies in run order.
pub fn history_jsonl(cell: &CellRun) -> Result<String> {
    let mut out = String::new();
    for (_, history) in &cell.histories {
        for record in history {
            out.push_str(&serde_json::to_string(&HistoryLine {
                dataset: &cell.key.dataset,
                split: &cell.key.split,
                seed: cell.key.seed,
                record,
            })?);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Writes via a sibling temp file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn table_path(dir: &Path, key: &CellKey, format: Format) -> PathBuf {
    dir.join(format!("{}.{}", key.file_stem(), format.extension()))
}

pub fn history_path(dir: &Path, key: &CellKey) -> PathBuf {
    dir.join(format!("{}.history.jsonl", key.file_stem()))
}

pub fn run_grid(config: &ExperimentConfig, options: &GridOptions) -> Result<GridReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = options.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_grid_in_pool(config, options))
}

fn run_grid_in_pool(config: &ExperimentConfig, options: &GridOptions) -> Result<GridReport> {
    let loaded: Vec<(String, Result<Dataset>)> = config
        .datasets
        .par_iter()
        .map(|entry| {
            let data = entry.source.load().map(|p| {
                info!(
                    "loaded {}: {} rows, {} positives, {} features",
                    entry.source.name, p.report.rows, p.report.positives, p.report.feature_count
                );
                p.dataset
            });
            (entry.source.name.clone(), data)
        })
        .collect();

    let mut jobs = Vec::new();
    for (name, data) in &loaded {
        for &split in &config.splits {
            for &seed in &config.seeds {
                let key = CellKey {
                    dataset: name.clone(),
                    split: split.label(),
                    seed,
                };
                jobs.push((key, split, data));
            }
        }
    }

    let results: Vec<std::result::Result<CellRun, CellFailure>> = jobs
        .into_par_iter()
        .map(|(key, split, data)| {
            let outcome = match data {
                Ok(d) => run_cell(d, key.clone(), split, config, &Parallel),
                Err(e) => Err(Error::Config(format!("dataset unavailable: {e}"))),
            };
            outcome.map_err(|e| {
                warn!("cell {} failed: {e}", key.file_stem());
                CellFailure {
                    key,
                    message: e.to_string(),
                }
            })
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(c) => cells.push(c),
            Err(f) => failures.push(f),
        }
    }
    let averages: Vec<CellAverages> = cells
        .iter()
        .map(|c| CellAverages::from_table(c.key.clone(), &c.table))
        .collect();
    let summary = Summary::from_cells(&averages);

    if options.write {
        let dir = &config.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for cell in &cells {
            write_atomic(
                &table_path(dir, &cell.key, options.format),
                cell.table.emit(options.format).as_bytes(),
            )?;
            write_atomic(&history_path(dir, &cell.key), history_jsonl(cell)?.as_bytes())?;
        }
        write_atomic(&dir.join(SUMMARY_FILE), summary.render().as_bytes())?;
        let failures_path = dir.join(FAILURES_FILE);
        if failures.is_empty() {
            if failures_path.exists() {
                std::fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
            }
        } else {
            let text: String = failures
                .iter()
                .map(|f| format!("{}\t{}\n", f.key.file_stem(), f.message))
                .collect();
            write_atomic(&failures_path, text.as_bytes())?;
        }
    }
    Ok(GridReport {
        cells,
        failures,
        summary,
    })
}

/// Rebuilds the summary from table files in `dir`, using each file's printed
/// `Avg` row.
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut averages = Vec::new();
    for path in entries {
        let Some(format) = path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(Format::from_extension)
        else {
            continue;
        };
        let Some(key) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(CellKey::from_file_stem)
        else {
            continue;
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let parsed = ResultsTable::parse(&text, format)?;
        averages.push(CellAverages {
            key,
            local: parsed.avg.local,
            federated: parsed
                .table
                .strategies
                .iter()
                .copied()
                .zip(parsed.avg.federated)
                .collect(),
        });
    }
    Ok(Summary::from_cells(&averages))
}
