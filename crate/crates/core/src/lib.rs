//! Core of a deterministic peer-to-peer federated learning simulator.
//!
//! Everything in this crate is a pure function of its inputs and an explicit
//! [`RngStream`]; there is no IO and no global state, so the crate builds
//! without `std`. File formats, configuration and the command line live in
//! the companion `peerfed` crate.
//!
//! The pieces, bottom-up:
//!
//! * [`nn`]: a five-layer dense binary classifier trained with SGD.
//! * [`metrics`]: confusion matrix, accuracy and per-round loss bookkeeping.
//! * [`aggregation`]: the six weighting strategies and the weighted merge.
//! * [`preprocess`] and [`partition`]: tabular cleanup and the simulated
//!   hospital splits.
//! * [`federation`]: the fully connected round protocol and its consensus
//!   check.

#![no_std]

extern crate alloc;

pub mod aggregation;
pub mod dataset;
mod error;
pub mod federation;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod partition;
pub mod preprocess;
mod rng;

pub use aggregation::{
    aggregate, compute_contribution, compute_weights, AggregationOptions, ParticipantStats,
    StrategyId, WeightVector, Weights,
};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use federation::{
    check_termination, initiate, run_federation, run_round, Executor, FederationOutcome,
    FederationSettings, Peer, PeerId, RoundRecord, Sequential, StopReason, Termination,
    TerminationCriteria,
};
pub use matrix::Matrix;
pub use metrics::{accuracy, confusion, ConfusionMatrix};
pub use nn::{
    backward, bce_loss, forward, init_params, train_local, GradSet, Layer, LocalTraining, Mode,
    ParamSet, Topology,
};
pub use partition::{partition, train_test_split, Partition, SplitKind, SplitScheme};
pub use rng::RngStream;

/// Lower/upper clamp applied to probabilities before taking logarithms.
pub const PROB_EPSILON: f64 = 1e-7;
