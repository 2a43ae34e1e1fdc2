//! TOML experiment configuration with a strict schema.
//!
//! ```toml
//! strategies = ["fed_avg", "inv_accuracy"]
//! seeds = [1, 2, 3]
//!
//! [[dataset]]
//! preset = "breast_cancer"
//!
//! [[split]]
//! kind = "skewed_uneven"
//! min_small = 2
//!
//! [training]
//! epochs = 50
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::fmt;
use std::path::{Path, PathBuf};

use log::info;
use peerfed_core::aggregation::{AggregationOptions, StrategyId};
use peerfed_core::nn::{LocalTraining, Topology, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use peerfed_core::partition::{PartitionOptions, SplitKind, SplitScheme};
use peerfed_core::TerminationCriteria;
use serde::Deserialize;

use crate::csv_load::CsvSchema;
use crate::datasets::{DatasetSource, Preset};
use crate::error::{Error, Result};

pub const DEFAULT_PARTICIPANTS: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: Vec<RawDataset>,
    strategies: Vec<String>,
    split: Option<Vec<RawSplit>>,
    seeds: Option<Vec<u64>>,
    participants: Option<usize>,
    data_dir: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    model: Option<RawModel>,
    training: Option<RawTraining>,
    termination: Option<RawTermination>,
    aggregation: Option<RawAggregation>,
    data: Option<RawData>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    preset: Option<String>,
    name: Option<String>,
    path: Option<PathBuf>,
    label_column: Option<String>,
    positive_label: Option<String>,
    drop_columns: Option<Vec<String>>,
    missing_tokens: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    kind: String,
    min_small: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    hidden: Option<[usize; 4]>,
    dropout: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTermination {
    max_rounds: Option<usize>,
    patience: Option<usize>,
    target_mean_accuracy: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAggregation {
    normalize_size_accuracy: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    train_ratio: Option<f64>,
    scale_per_partition: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub min_small: usize,
}

impl SplitSpec {
    pub const fn even() -> Self {
        Self {
            kind: SplitKind::Even,
            min_small: 0,
        }
    }

    pub const fn random_uneven() -> Self {
        Self {
            kind: SplitKind::RandomUneven,
            min_small: 0,
        }
    }

    pub const fn skewed(min_small: usize) -> Self {
        Self {
            kind: SplitKind::SkewedUneven,
            min_small,
        }
    }

    /// Used in file names and tables.
    pub fn label(&self) -> String {
        match self.kind {
            SplitKind::SkewedUneven => format!("skewed_uneven_min{}", self.min_small),
            kind => kind.as_str().to_string(),
        }
    }

    pub fn scheme(&self, n: usize, seed: u64) -> SplitScheme {
        match self.kind {
            SplitKind::Even => SplitScheme::even(n, seed),
            SplitKind::RandomUneven => SplitScheme::random_uneven(n, seed),
            SplitKind::SkewedUneven => SplitScheme::skewed(n, self.min_small, seed),
        }
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub const DEFAULT_SPLITS: [SplitSpec; 4] = [
    SplitSpec::even(),
    SplitSpec::random_uneven(),
    SplitSpec::skewed(1),
    SplitSpec::skewed(2),
];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub preset: Option<Preset>,
    pub source: DatasetSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    pub splits: Vec<SplitSpec>,
    pub strategies: Vec<StrategyId>,
    pub seeds: Vec<u64>,
    pub participants: usize,
    pub hidden: [usize; 4],
    pub dropout: f64,
    pub training: LocalTraining,
    pub termination: TerminationCriteria,
    pub aggregation: AggregationOptions,
    pub partition: PartitionOptions,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn topology(&self, features: usize) -> Result<Topology> {
        Ok(Topology::from_hidden(features, self.hidden, self.dropout)?)
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn or_default<T: fmt::Debug>(value: Option<T>, key: &str, default: T) -> T {
    value.unwrap_or_else(|| {
        info!("default {key} = {default:?}");
        default
    })
}

/// Reads, parses and validates a config file.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Parses config text; relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.message().to_string()))?;
    resolve(raw, base)
}

fn resolve(raw: RawConfig, base: &Path) -> Result<ExperimentConfig> {
    let data_dir = base.join(or_default(raw.data_dir, "data_dir", PathBuf::from("data")));
    let output_dir = base.join(or_default(raw.output_dir, "output_dir", PathBuf::from("results")));

    if raw.dataset.is_empty() {
        return Err(config_err("at least one [[dataset]] is required"));
    }
    let datasets = raw
        .dataset
        .into_iter()
        .map(|d| resolve_dataset(d, base, &data_dir))
        .collect::<Result<Vec<_>>>()?;

    if raw.strategies.is_empty() {
        return Err(config_err("at least one strategy is required"));
    }
    let mut strategies = Vec::new();
    for s in &raw.strategies {
        let id: StrategyId = s
            .parse()
            .map_err(|_| config_err(format!("unknown strategy `{s}`")))?;
        if strategies.contains(&id) {
            return Err(config_err(format!("strategy `{s}` listed twice")));
        }
        strategies.push(id);
    }

    let participants = or_default(raw.participants, "participants", DEFAULT_PARTICIPANTS);
    if participants < 2 {
        return Err(config_err(format!(
            "participants = {participants}: federation needs a minimum of two participants"
        )));
    }

    let splits = match raw.split {
        Some(list) if list.is_empty() => return Err(config_err("[[split]] list is empty")),
        Some(list) => list
            .into_iter()
            .map(|s| resolve_split(s, participants))
            .collect::<Result<Vec<_>>>()?,
        None => {
            info!("default split = {:?}", DEFAULT_SPLITS.map(|s| s.label()));
            DEFAULT_SPLITS.to_vec()
        }
    };
    for s in &splits {
        if s.min_small >= participants {
            return Err(config_err(format!(
                "split {s}: min_small must be below participants ({participants})"
            )));
        }
    }

    let seeds = or_default(raw.seeds, "seeds", vec![DEFAULT_SEED]);
    if seeds.is_empty() {
        return Err(config_err("at least one seed is required"));
    }

    let model = raw.model.unwrap_or_default();
    let hidden = or_default(model.hidden, "model.hidden", DEFAULT_HIDDEN);
    let dropout = or_default(model.dropout, "model.dropout", DEFAULT_DROPOUT);
    if hidden.contains(&0) {
        return Err(config_err("model.hidden widths must be positive"));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(config_err(format!("model.dropout = {dropout} outside [0, 1)")));
    }

    let defaults = LocalTraining::default();
    let t = raw.training.unwrap_or_default();
    let training = LocalTraining {
        epochs: or_default(t.epochs, "training.epochs", defaults.epochs),
        batch_size: or_default(t.batch_size, "training.batch_size", defaults.batch_size),
        learning_rate: or_default(t.learning_rate, "training.learning_rate", defaults.learning_rate),
    };
    if training.epochs == 0 || training.batch_size == 0 {
        return Err(config_err("training.epochs and training.batch_size must be positive"));
    }
    if !(training.learning_rate.is_finite() && training.learning_rate > 0.0) {
        return Err(config_err(format!(
            "training.learning_rate = {} must be positive",
            training.learning_rate
        )));
    }

    let defaults = TerminationCriteria::default();
    let t = raw.termination.unwrap_or_default();
    let termination = TerminationCriteria {
        max_rounds: or_default(t.max_rounds, "termination.max_rounds", defaults.max_rounds),
        patience: or_default(t.patience, "termination.patience", defaults.patience),
        target_mean_accuracy: t.target_mean_accuracy,
    };
    termination
        .validate()
        .map_err(|e| config_err(format!("termination: {e}")))?;

    let a = raw.aggregation.unwrap_or_default();
    let aggregation = AggregationOptions {
        normalize_size_accuracy: or_default(
            a.normalize_size_accuracy,
            "aggregation.normalize_size_accuracy",
            false,
        ),
    };

    let defaults = PartitionOptions::default();
    let d = raw.data.unwrap_or_default();
    let partition = PartitionOptions {
        train_ratio: or_default(d.train_ratio, "data.train_ratio", defaults.train_ratio),
        scale_per_partition: or_default(
            d.scale_per_partition,
            "data.scale_per_partition",
            defaults.scale_per_partition,
        ),
    };
    if !(partition.train_ratio > 0.0 && partition.train_ratio < 1.0) {
        return Err(config_err(format!(
            "data.train_ratio = {} outside (0, 1)",
            partition.train_ratio
        )));
    }

    Ok(ExperimentConfig {
        datasets,
        splits,
        strategies,
        seeds,
        participants,
        hidden,
        dropout,
        training,
        termination,
        aggregation,
        partition,
        output_dir,
    })
}

fn resolve_split(raw: RawSplit, participants: usize) -> Result<SplitSpec> {
    match raw.kind.as_str() {
        "even" | "random_uneven" if raw.min_small.is_some() => Err(config_err(format!(
            "split `{}` does not take min_small",
            raw.kind
        ))),
        "even" => Ok(SplitSpec::even()),
        "random_uneven" => Ok(SplitSpec::random_uneven()),
        "skewed_uneven" => {
            let min_small = or_default(raw.min_small, "split.min_small", 1);
            if min_small == 0 || min_small >= participants {
                return Err(config_err(format!(
                    "split skewed_uneven: min_small = {min_small} must be in 1..{participants}"
                )));
            }
            Ok(SplitSpec::skewed(min_small))
        }
        other => Err(config_err(format!("unknown split kind `{other}`"))),
    }
}

fn resolve_dataset(raw: RawDataset, base: &Path, data_dir: &Path) -> Result<DatasetEntry> {
    let (preset, mut source) = match &raw.preset {
        Some(name) => {
            let preset: Preset = name.parse()?;
            let source = preset.source();
            let path = data_dir.join(&source.path);
            (Some(preset), source.with_path(path))
        }
        None => {
            let name = raw
                .name
                .clone()
                .ok_or_else(|| config_err("dataset needs `preset` or `name`"))?;
            let label = raw
                .label_column
                .clone()
                .ok_or_else(|| config_err(format!("dataset {name}: label_column is required")))?;
            let positive = raw
                .positive_label
                .clone()
                .ok_or_else(|| config_err(format!("dataset {name}: positive_label is required")))?;
            let path = raw
                .path
                .clone()
                .ok_or_else(|| config_err(format!("dataset {name}: path is required")))?;
            let source = DatasetSource {
                name,
                path,
                schema: CsvSchema::new(label, positive),
                drop_columns: Vec::new(),
            };
            (None, source)
        }
    };
    if let Some(name) = raw.name {
        source.name = name;
    }
    if let Some(path) = raw.path {
        source.path = base.join(path);
    }
    if let Some(label) = raw.label_column {
        source.schema.label_column = label;
    }
    if let Some(positive) = raw.positive_label {
        source.schema.positive_label = positive;
    }
    if let Some(drop) = raw.drop_columns {
        source.drop_columns = drop;
    }
    if let Some(tokens) = raw.missing_tokens {
        source.schema.missing_tokens = tokens;
    }
    if !source.path.is_file() {
        return Err(config_err(format!(
            "dataset {}: file {} not found",
            source.name,
            source.path.display()
        )));
    }
    Ok(DatasetEntry { preset, source })
}
