//! Simulated hospitals: disjoint row partitions and per-partition train/test
//! splits.
//!
//! Uneven fractions come from a symmetric Dirichlet(2) draw, rejected until
//! every participant holds at least 2% of the rows (and, for the skewed
//! scheme, exactly `min_small` participants fall inside (2%, 10%)). Rows are
//! shuffled once and sliced contiguously.

use alloc::format;
use alloc::vec::Vec;

use crate::dataset::{apply_standardization, column_moments, Dataset};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const MIN_FRACTION: f64 = 0.02;
pub const SMALL_FRACTION: f64 = 0.10;
pub const DIRICHLET_SHAPE: u32 = 2;
pub const MIN_TEST_ROWS: usize = 2;
const MAX_ATTEMPTS: usize = 200_000;

// Stream ids below 2^32 belong to the federation (initial model, peers).
const SIZE_STREAM: u64 = 1 << 32;
const SHUFFLE_STREAM: u64 = SIZE_STREAM + 1;
const SPLIT_STREAM_BASE: u64 = SIZE_STREAM + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitKind {
    Even,
    RandomUneven,
    SkewedUneven,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Even => "even",
            SplitKind::RandomUneven => "random_uneven",
            SplitKind::SkewedUneven => "skewed_uneven",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitScheme {
    pub kind: SplitKind,
    pub n: usize,
    /// Participants forced below 10% (skewed scheme only).
    pub min_small: usize,
    pub seed: u64,
}

impl SplitScheme {
    pub fn even(n: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::Even,
            n,
            min_small: 0,
            seed,
        }
    }

    pub fn random_uneven(n: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::RandomUneven,
            n,
            min_small: 0,
            seed,
        }
    }

    pub fn skewed(n: usize, min_small: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::SkewedUneven,
            n,
            min_small,
            seed,
        }
    }

    /// Smallest row count any partition may receive.
    pub fn min_rows(&self) -> usize {
        self.n.max(10)
    }

    pub fn validate(&self, total_rows: usize) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewParticipants(self.n));
        }
        if self.min_small >= self.n {
            return Err(Error::InfeasibleSplit(format!(
                "min_small {} must be below the participant count {}",
                self.min_small, self.n
            )));
        }
        if total_rows < self.n * self.min_rows() {
            return Err(Error::InfeasibleSplit(format!(
                "{total_rows} rows cannot give {} participants {} rows each",
                self.n,
                self.min_rows()
            )));
        }
        if self.kind == SplitKind::SkewedUneven && self.min_small > 0 {
            let largest_small = ceil_below(SMALL_FRACTION * total_rows as f64);
            if largest_small < self.min_rows() || largest_small as f64 <= MIN_FRACTION * total_rows as f64 {
                return Err(Error::InfeasibleSplit(format!(
                    "{total_rows} rows leave no room for a participant in (2%, 10%) with at least {} rows",
                    self.min_rows()
                )));
            }
        }
        Ok(())
    }
}

/// Largest integer strictly below `x` (for positive `x`).
fn ceil_below(x: f64) -> usize {
    let c = libm::ceil(x) as usize;
    c.saturating_sub(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// 1-based.
    pub participant_id: u32,
    pub train: Dataset,
    pub test: Dataset,
    /// Share of all rows held by this participant.
    pub size_fraction: f64,
    pub positive_rate: f64,
    /// Original row indices.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl Partition {
    pub fn rows(&self) -> usize {
        self.train_rows.len() + self.test_rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOptions {
    pub train_ratio: f64,
    /// Standardize each partition with its own training statistics.
    pub scale_per_partition: bool,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            train_ratio: 0.8,
            scale_per_partition: false,
        }
    }
}

fn even_sizes(total: usize, n: usize) -> Vec<usize> {
    let base = total / n;
    let extra = total % n;
    (0..n).map(|i| base + usize::from(i < extra)).collect()
}

/// Integer sizes from fractions by largest remainder; ties go to the lower
/// index.
fn sizes_from_fractions(fractions: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|&e| libm::floor(e) as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - sizes[a] as f64;
        let rb = exact[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

fn dirichlet(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.gamma_integer(DIRICHLET_SHAPE)).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / sum).collect()
}

fn acceptable(sizes: &[usize], total: usize, scheme: &SplitScheme) -> bool {
    let t = total as f64;
    let min_rows = scheme.min_rows();
    if sizes
        .iter()
        .any(|&s| s < min_rows || (s as f64) / t < MIN_FRACTION)
    {
        return false;
    }
    match scheme.kind {
        SplitKind::SkewedUneven => {
            let small = sizes
                .iter()
                .filter(|&&s| (s as f64) / t < SMALL_FRACTION)
                .count();
            let all_small_above_floor = sizes
                .iter()
                .filter(|&&s| (s as f64) / t < SMALL_FRACTION)
                .all(|&s| (s as f64) / t > MIN_FRACTION);
            small == scheme.min_small && all_small_above_floor
        }
        _ => true,
    }
}

/// Row count per participant.
pub fn partition_sizes(total: usize, scheme: &SplitScheme) -> Result<Vec<usize>> {
    scheme.validate(total)?;
    if scheme.kind == SplitKind::Even {
        return Ok(even_sizes(total, scheme.n));
    }
    let mut rng = RngStream::new(scheme.seed, SIZE_STREAM);
    for _ in 0..MAX_ATTEMPTS {
        let fractions = dirichlet(scheme.n, &mut rng);
        let sizes = sizes_from_fractions(&fractions, total);
        if acceptable(&sizes, total, scheme) {
            return Ok(sizes);
        }
    }
    Err(Error::InfeasibleSplit(format!(
        "no acceptable {} split of {total} rows after {MAX_ATTEMPTS} draws",
        scheme.kind.as_str()
    )))
}

/// Disjoint cover of `0..total`, one row list per participant.
pub fn partition_rows(total: usize, scheme: &SplitScheme) -> Result<Vec<Vec<usize>>> {
    let sizes = partition_sizes(total, scheme)?;
    let mut order: Vec<usize> = (0..total).collect();
    RngStream::new(scheme.seed, SHUFFLE_STREAM).shuffle(&mut order);
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        out.push(order[start..start + s].to_vec());
        start += s;
    }
    Ok(out)
}

/// Shuffle `rows` and send `round(ratio · len)` of them to the training side.
pub fn train_test_split(
    rows: &[usize],
    ratio: f64,
    rng: &mut RngStream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter {
            name: "train_ratio",
            reason: format!("{ratio} outside (0, 1)"),
        });
    }
    let train_len = libm::round(ratio * rows.len() as f64) as usize;
    if train_len == 0 || rows.len() - train_len.min(rows.len()) < MIN_TEST_ROWS {
        return Err(Error::InfeasibleSplit(format!(
            "{} rows at ratio {ratio} leave fewer than {MIN_TEST_ROWS} test rows",
            rows.len()
        )));
    }
    let mut shuffled = rows.to_vec();
    rng.shuffle(&mut shuffled);
    let test = shuffled.split_off(train_len);
    Ok((shuffled, test))
}

pub fn partition(
    dataset: &Dataset,
    scheme: &SplitScheme,
    options: &PartitionOptions,
) -> Result<Vec<Partition>> {
    let total = dataset.len();
    let groups = partition_rows(total, scheme)?;
    let mut out = Vec::with_capacity(groups.len());
    for (i, rows) in groups.into_iter().enumerate() {
        let id = i as u32 + 1;
        let mut rng = RngStream::new(scheme.seed, SPLIT_STREAM_BASE + u64::from(id));
        let (train_rows, test_rows) = train_test_split(&rows, options.train_ratio, &mut rng)?;
        let mut train = dataset.select(&train_rows);
        let mut test = dataset.select(&test_rows);
        if options.scale_per_partition {
            let (means, stds) = column_moments(&train.features);
            apply_standardization(&mut train.features, &means, &stds);
            apply_standardization(&mut test.features, &means, &stds);
        }
        let positives = train.positives() + test.positives();
        out.push(Partition {
            participant_id: id,
            size_fraction: rows.len() as f64 / total as f64,
            positive_rate: positives as f64 / rows.len() as f64,
            train,
            test,
            train_rows,
            test_rows,
        });
    }
    Ok(out)
}
