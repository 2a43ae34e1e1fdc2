//! Federation strategies: per-participant coefficients and the weighted merge.
//!
//! Every strategy produces a coefficient `w_i` per participant and the
//! federated parameters are `Σ w_i · Φ_i`, accumulated in participant order.
//!
//! | strategy           | coefficient                          |
//! |--------------------|--------------------------------------|
//! | `fed_avg`          | `1 / n`                              |
//! | `size`             | `|D_i| / Σ|D_k|`                     |
//! | `inv_accuracy`     | `(1/acc_i) / Σ(1/acc_k)`             |
//! | `size_accuracy`    | `acc_i·|D_i| / Σ|D_k|` (not unit-sum) |
//! | `contribution`     | `C_i / Σ C_k`                        |
//! | `inv_contribution` | `(1/C_i) / Σ(1/C_k)`                 |
//!
//! `C_i = |L*(D_i, Φ') − L(D_i, Φ_i)|` compares the previous federated
//! model with the participant's freshly trained one on the participant's own
//! data. Before a federated model exists the contribution strategies fall
//! back to `fed_avg`.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::ParamSet;

/// Additive guard for accuracy or contribution terms that are exactly zero.
pub const ZERO_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StrategyId {
    FedAvg,
    Size,
    InvAccuracy,
    SizeAccuracy,
    Contribution,
    InvContribution,
}

impl StrategyId {
    pub const ALL: [StrategyId; 6] = [
        StrategyId::FedAvg,
        StrategyId::Size,
        StrategyId::InvAccuracy,
        StrategyId::SizeAccuracy,
        StrategyId::Contribution,
        StrategyId::InvContribution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::FedAvg => "fed_avg",
            StrategyId::Size => "size",
            StrategyId::InvAccuracy => "inv_accuracy",
            StrategyId::SizeAccuracy => "size_accuracy",
            StrategyId::Contribution => "contribution",
            StrategyId::InvContribution => "inv_contribution",
        }
    }

    /// Column heading used in result tables.
    pub fn column_label(self) -> &'static str {
        match self {
            StrategyId::FedAvg => "Acc Federated",
            StrategyId::Size => "Acc Size",
            StrategyId::InvAccuracy => "Acc Accuracy",
            StrategyId::SizeAccuracy => "Acc Size & acc",
            StrategyId::Contribution => "Acc Cont",
            StrategyId::InvContribution => "Acc Inv Cont",
        }
    }

    pub fn from_column_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.column_label() == label)
    }

    /// Whether the coefficients always sum to one.
    pub fn is_normalized(self) -> bool {
        !matches!(self, StrategyId::SizeAccuracy)
    }

    pub fn uses_contribution(self) -> bool {
        matches!(self, StrategyId::Contribution | StrategyId::InvContribution)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "strategy",
                reason: format!("unknown strategy `{s}`"),
            })
    }
}

/// What one participant shares alongside its parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParticipantStats {
    pub dataset_size: usize,
    pub test_accuracy: f64,
    pub local_loss: f64,
    /// Loss of the previous federated model on this participant's data.
    pub global_loss: Option<f64>,
    /// `|global_loss − local_loss|` when a federated model exists.
    pub contribution: Option<f64>,
}

impl ParticipantStats {
    pub fn new(
        dataset_size: usize,
        test_accuracy: f64,
        local_loss: f64,
        global_loss: Option<f64>,
    ) -> Result<Self> {
        let contribution = global_loss
            .map(|g| compute_contribution(local_loss, g))
            .transpose()?;
        Ok(Self {
            dataset_size,
            test_accuracy,
            local_loss,
            global_loss,
            contribution,
        })
    }

    /// Stats carrying only a contribution value, for callers that computed it
    /// elsewhere.
    pub fn with_contribution(dataset_size: usize, test_accuracy: f64, contribution: f64) -> Self {
        Self {
            dataset_size,
            test_accuracy,
            local_loss: 0.0,
            global_loss: Some(contribution),
            contribution: Some(contribution),
        }
    }
}

/// `|global − local|`.
pub fn compute_contribution(local_loss: f64, global_loss: f64) -> Result<f64> {
    if !local_loss.is_finite() || !global_loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    if local_loss < 0.0 || global_loss < 0.0 {
        return Err(Error::InvalidParameter {
            name: "loss",
            reason: "losses must be non-negative".to_owned(),
        });
    }
    Ok((global_loss - local_loss).abs())
}

/// One coefficient per participant, in participant-id order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "weights must be non-negative".to_owned(),
            });
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(alloc::vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregationOptions {
    /// Rescale `size_accuracy` coefficients to sum to one.
    pub normalize_size_accuracy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub vector: WeightVector,
    /// The strategy could not be evaluated and `fed_avg` was used instead.
    pub fallback_used: bool,
}

fn guard(v: f64) -> f64 {
    if v == 0.0 {
        v + ZERO_GUARD
    } else {
        v
    }
}

fn normalize(terms: Vec<f64>) -> Vec<f64> {
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / total).collect()
}

fn validate(stats: &[ParticipantStats]) -> Result<()> {
    if stats.len() < 2 {
        return Err(Error::TooFewParticipants(stats.len()));
    }
    for (i, s) in stats.iter().enumerate() {
        if s.dataset_size == 0 {
            return Err(Error::InvalidParameter {
                name: "dataset_size",
                reason: format!("participant {i} has an empty dataset"),
            });
        }
        if !(0.0..=1.0).contains(&s.test_accuracy) {
            return Err(Error::InvalidParameter {
                name: "test_accuracy",
                reason: format!("participant {i}: {} outside [0, 1]", s.test_accuracy),
            });
        }
        if let Some(c) = s.contribution {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "contribution",
                    reason: format!("participant {i}: {c} is not a finite non-negative number"),
                });
            }
        }
    }
    Ok(())
}

/// Coefficients for `strategy`; `stats` must be in participant-id order.
pub fn compute_weights(
    strategy: StrategyId,
    stats: &[ParticipantStats],
    options: &AggregationOptions,
) -> Result<Weights> {
    validate(stats)?;
    let n = stats.len();
    let fallback = || {
        log::debug!("{strategy}: no usable contributions, falling back to fed_avg");
        Ok(Weights {
            vector: WeightVector::uniform(n),
            fallback_used: true,
        })
    };

    let contributions: Option<Vec<f64>> = if strategy.uses_contribution() {
        let present = stats.iter().filter(|s| s.contribution.is_some()).count();
        if present == 0 {
            return fallback();
        }
        if let Some(index) = stats.iter().position(|s| s.contribution.is_none()) {
            return Err(Error::MissingStats {
                what: "contribution",
                index,
            });
        }
        Some(stats.iter().filter_map(|s| s.contribution).collect())
    } else {
        None
    };

    let total_size: f64 = stats.iter().map(|s| s.dataset_size as f64).sum();
    let weights = match strategy {
        StrategyId::FedAvg => WeightVector::uniform(n).0,
        StrategyId::Size => stats
            .iter()
            .map(|s| s.dataset_size as f64 / total_size)
            .collect(),
        StrategyId::InvAccuracy => {
            normalize(stats.iter().map(|s| 1.0 / guard(s.test_accuracy)).collect())
        }
        StrategyId::SizeAccuracy => {
            let raw: Vec<f64> = stats
                .iter()
                .map(|s| s.test_accuracy * s.dataset_size as f64 / total_size)
                .collect();
            if options.normalize_size_accuracy {
                if raw.iter().all(|&w| w == 0.0) {
                    return fallback();
                }
                normalize(raw)
            } else {
                raw
            }
        }
        StrategyId::Contribution => {
            let c = contributions.unwrap_or_default();
            if c.iter().all(|&v| v == 0.0) {
                return fallback();
            }
            normalize(c)
        }
        StrategyId::InvContribution => {
            let c = contributions.unwrap_or_default();
            normalize(c.into_iter().map(|v| 1.0 / guard(v)).collect())
        }
    };

    Ok(Weights {
        vector: WeightVector::new(weights)?,
        fallback_used: false,
    })
}

/// `Σ w_i · Φ_i`, accumulated in slice order.
pub fn aggregate<P: Borrow<ParamSet>>(param_sets: &[P], weights: &WeightVector) -> Result<ParamSet> {
    let first = param_sets.first().ok_or(Error::Empty("parameter sets"))?.borrow();
    if weights.len() != param_sets.len() {
        return Err(Error::LengthMismatch {
            expected: param_sets.len(),
            actual: weights.len(),
        });
    }
    if let Some(i) = param_sets.iter().position(|p| !p.borrow().same_shape(first)) {
        return Err(Error::ShapeMismatch(format!(
            "participant {i} has a different parameter shape"
        )));
    }
    let w = weights.as_slice();
    let mut out = first.clone();
    for v in out.values_mut() {
        *v *= w[0];
    }
    for (p, &wi) in param_sets[1..].iter().zip(&w[1..]) {
        for (acc, v) in out.values_mut().zip(p.borrow().values()) {
            *acc += wi * v;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("aggregated parameters"));
    }
    Ok(out)
}
