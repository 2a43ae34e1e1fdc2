use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Probability at or above which a prediction counts as class 1.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    /// Same counts with the positive and negative classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn error_rate(&self) -> Result<f64> {
        accuracy(self).map(|a| 1.0 - a)
    }
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Share of correct predictions.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::Empty("confusion matrix")),
        total => Ok(cm.correct() as f64 / total as f64),
    }
}

pub fn threshold(probs: &[f64]) -> Vec<u8> {
    probs
        .iter()
        .map(|&p| u8::from(p >= DECISION_THRESHOLD))
        .collect()
}

/// Per-participant numbers produced in one round.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeerMetrics {
    pub peer: u32,
    /// Test accuracy of the locally trained model.
    pub test_accuracy: f64,
    /// Loss of the locally trained model on the participant's training data.
    pub local_loss: f64,
    /// Loss of the new federated model on the same data.
    pub global_loss: f64,
    /// Contribution used for this round's weights; `None` before any
    /// federated model existed.
    pub contribution: Option<f64>,
    /// Test accuracy of the new federated model.
    pub federated_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundMetrics {
    pub peers: Vec<PeerMetrics>,
    /// Mean of the per-participant federated losses.
    pub global_loss_avg: f64,
}

impl RoundMetrics {
    pub fn new(peers: Vec<PeerMetrics>) -> Self {
        let global_loss_avg = mean(peers.iter().map(|p| p.global_loss));
        Self {
            peers,
            global_loss_avg,
        }
    }

    pub fn mean_federated_accuracy(&self) -> f64 {
        mean(self.peers.iter().map(|p| p.federated_accuracy))
    }

    pub fn mean_local_accuracy(&self) -> f64 {
        mean(self.peers.iter().map(|p| p.test_accuracy))
    }
}

/// Arithmetic mean; NaN for an empty iterator.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}
