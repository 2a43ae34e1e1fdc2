use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.rows(),
                actual: labels.len(),
            });
        }
        if features.cols() != feature_names.len() {
            return Err(Error::LengthMismatch {
                expected: features.cols(),
                actual: feature_names.len(),
            });
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: "labels must be 0 or 1".into(),
            });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Fraction of rows labelled 1; zero for an empty dataset.
    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.len() as f64
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Z-score every column in place using population statistics of this
    /// dataset. Constant columns are centered only. Returns `(means, stds)`.
    pub fn standardize(&mut self) -> (Vec<f64>, Vec<f64>) {
        let (means, stds) = column_moments(&self.features);
        apply_standardization(&mut self.features, &means, &stds);
        (means, stds)
    }
}

/// Population mean and standard deviation of every column.
pub fn column_moments(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows() as f64;
    let mut means = Vec::with_capacity(m.cols());
    let mut stds = Vec::with_capacity(m.cols());
    for c in 0..m.cols() {
        let mean = m.column(c).sum::<f64>() / n;
        let var = m.column(c).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        means.push(mean);
        stds.push(libm::sqrt(var));
    }
    (means, stds)
}

pub fn apply_standardization(m: &mut Matrix, means: &[f64], stds: &[f64]) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        for (c, v) in row.iter_mut().enumerate() {
            let centered = *v - means[c];
            *v = if stds[c] > 0.0 {
                centered / stds[c]
            } else {
                centered
            };
        }
    }
}
