//! Win counts: how often a strategy's `Avg` accuracy beats the local `Avg`.
//!
//! Counts use the 4-decimal values as printed, so they can be recomputed from
//! the table files alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use peerfed_core::aggregation::StrategyId;

use crate::table::{round4, ResultsTable};

/// Identifies one grid cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub dataset: String,
    pub split: String,
    pub seed: u64,
}

impl CellKey {
    pub fn file_stem(&self) -> String {
        format!("{}__{}__seed{}", self.dataset, self.split, self.seed)
    }

    pub fn from_file_stem(stem: &str) -> Option<Self> {
        let mut parts = stem.split("__");
        let dataset = parts.next()?.to_string();
        let split = parts.next()?.to_string();
        let seed = parts.next()?.strip_prefix("seed")?.parse().ok()?;
        parts.next().is_none().then_some(Self {
            dataset,
            split,
            seed,
        })
    }
}

/// Printed `Avg` values of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAverages {
    pub key: CellKey,
    pub local: f64,
    pub federated: Vec<(StrategyId, f64)>,
}

impl CellAverages {
    pub fn from_table(key: CellKey, table: &ResultsTable) -> Self {
        let avg = table.avg();
        Self {
            key,
            local: round4(avg.local),
            federated: table
                .strategies
                .iter()
                .zip(&avg.federated)
                .map(|(s, v)| (*s, round4(*v)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrategyTally {
    pub wins: usize,
    pub cells: usize,
    pub sum_avg: f64,
    pub sum_gain: f64,
}

impl StrategyTally {
    pub fn mean_avg(&self) -> f64 {
        self.sum_avg / self.cells as f64
    }

    pub fn mean_gain(&self) -> f64 {
        self.sum_gain / self.cells as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub cells: usize,
    pub overall: BTreeMap<StrategyId, StrategyTally>,
    pub by_dataset: BTreeMap<String, BTreeMap<StrategyId, StrategyTally>>,
}

impl Summary {
    pub fn from_cells<'a>(cells: impl IntoIterator<Item = &'a CellAverages>) -> Self {
        let mut s = Summary::default();
        for cell in cells {
            s.cells += 1;
            for &(strategy, value) in &cell.federated {
                let gain = value - cell.local;
                for tally in [
                    s.overall.entry(strategy).or_default(),
                    s.by_dataset
                        .entry(cell.key.dataset.clone())
                        .or_default()
                        .entry(strategy)
                        .or_default(),
                ] {
                    tally.cells += 1;
                    tally.wins += usize::from(value > cell.local);
                    tally.sum_avg += value;
                    tally.sum_gain += gain;
                }
            }
        }
        s
    }

    pub fn wins(&self, strategy: StrategyId) -> usize {
        self.overall.get(&strategy).map_or(0, |t| t.wins)
    }

    /// Strategies by descending win count; ties keep declaration order.
    pub fn ranking(&self) -> Vec<(StrategyId, usize)> {
        let mut r: Vec<_> = self.overall.iter().map(|(s, t)| (*s, t.wins)).collect();
        r.sort_by_key(|&(_, wins)| std::cmp::Reverse(wins));
        r
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cells {}", self.cells);
        let _ = writeln!(
            s,
            "{:<18} {:>6} {:>6} {:>9} {:>9}",
            "strategy", "wins", "cells", "mean_avg", "mean_gain"
        );
        for (strategy, t) in &self.overall {
            let _ = writeln!(
                s,
                "{:<18} {:>6} {:>6} {:>9.4} {:>+9.4}",
                strategy.as_str(),
                t.wins,
                t.cells,
                t.mean_avg(),
                t.mean_gain()
            );
        }
        let ranking: Vec<String> = self
            .ranking()
            .iter()
            .map(|(s, w)| format!("{}={w}", s.as_str()))
            .collect();
        let _ = writeln!(s, "ranking {}", ranking.join(" "));
        for (dataset, tallies) in &self.by_dataset {
            let row: Vec<String> = tallies
                .iter()
                .map(|(st, t)| format!("{}={}/{}", st.as_str(), t.wins, t.cells))
                .collect();
            let _ = writeln!(s, "dataset {dataset} {}", row.join(" "));
        }
        s
    }
}
