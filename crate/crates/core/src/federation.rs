//! Fully connected peer-to-peer round protocol.
//!
//! One round:
//!
//! 1. every peer trains the shared model on its private training rows,
//! 2. evaluates it (test accuracy, training loss),
//! 3. broadcasts `(parameters, stats)` to every other peer,
//! 4. independently weights and merges all `n` models,
//! 5. evaluates the merged model on its own rows.
//!
//! All peers merge the same inputs in ascending peer-id order, so the merged
//! parameters must agree bit for bit; any difference aborts the run.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::aggregation::{
    aggregate, compute_weights, AggregationOptions, ParticipantStats, StrategyId, WeightVector,
};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, confusion, mean, threshold, PeerMetrics, RoundMetrics};
use crate::nn::{bce_loss, init_params, predict, train_local, LocalTraining, ParamSet, Topology};
use crate::partition::Partition;
use crate::rng::RngStream;
use crate::dataset::Dataset;

/// Stream id reserved for the initiating peer's model draw.
const INIT_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct PeerId(pub u32);

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What one peer sends to every other peer after local training.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub params: ParamSet,
    pub stats: ParticipantStats,
}

#[derive(Debug, Clone)]
pub struct Peer {
    pub id: PeerId,
    pub partition: Partition,
    pub current_params: ParamSet,
    /// Stats of the latest local model.
    pub stats: Option<ParticipantStats>,
    pub inbox: BTreeMap<PeerId, Broadcast>,
    rng: RngStream,
    /// Loss of `current_params` on the training rows once it is a federated
    /// model; `None` before the first merge.
    prior_global_loss: Option<f64>,
    trained: Option<ParamSet>,
}

impl Peer {
    pub fn prior_global_loss(&self) -> Option<f64> {
        self.prior_global_loss
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FederationSettings {
    pub topology: Topology,
    pub training: LocalTraining,
    pub strategy: StrategyId,
    pub aggregation: AggregationOptions,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub strategy: StrategyId,
    pub weights: WeightVector,
    pub metrics: RoundMetrics,
    pub consensus_ok: bool,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TerminationCriteria {
    pub max_rounds: usize,
    pub target_mean_accuracy: Option<f64>,
    /// Rounds without a new best mean accuracy before stopping.
    pub patience: usize,
}

impl Default for TerminationCriteria {
    fn default() -> Self {
        Self {
            max_rounds: 10,
            target_mean_accuracy: None,
            patience: 5,
        }
    }
}

impl TerminationCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::InvalidParameter {
                name: "max_rounds",
                reason: "must be at least 1".into(),
            });
        }
        if let Some(t) = self.target_mean_accuracy {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidParameter {
                    name: "target_mean_accuracy",
                    reason: format!("{t} outside (0, 1]"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    MaxRounds,
    TargetReached,
    Patience,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Continue,
    Stop(StopReason),
}

/// Runs a closure over every peer. Implementations may run peers
/// concurrently but must return results in peer order.
pub trait Executor {
    fn map_peers<T, F>(&self, peers: &mut [Peer], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut Peer) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_peers<T, F>(&self, peers: &mut [Peer], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut Peer) -> T + Sync + Send,
    {
        peers.iter_mut().map(f).collect()
    }
}

/// Peer 1 draws the initial model and every peer starts from a copy.
pub fn initiate(topology: &Topology, partitions: Vec<Partition>, seed: u64) -> Result<Vec<Peer>> {
    if partitions.len() < 2 {
        return Err(Error::TooFewParticipants(partitions.len()));
    }
    for p in &partitions {
        if p.train.feature_count() != topology.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "participant {} has {} features, topology expects {}",
                p.participant_id,
                p.train.feature_count(),
                topology.input_dim()
            )));
        }
    }
    let initial = init_params(topology, &mut RngStream::new(seed, INIT_STREAM));
    Ok(partitions
        .into_iter()
        .enumerate()
        .map(|(i, partition)| {
            let id = PeerId(i as u32 + 1);
            Peer {
                id,
                partition,
                current_params: initial.clone(),
                stats: None,
                inbox: BTreeMap::new(),
                rng: RngStream::new(seed, u64::from(id.0)),
                prior_global_loss: None,
                trained: None,
            }
        })
        .collect())
}

fn evaluate(params: &ParamSet, data: &Dataset) -> Result<(f64, f64)> {
    let probs = predict(params, &data.features)?;
    let loss = bce_loss(&probs, &data.labels)?;
    let acc = accuracy(&confusion(&threshold(&probs), &data.labels)?)?;
    Ok((loss, acc))
}

fn test_accuracy(params: &ParamSet, data: &Dataset) -> Result<f64> {
    evaluate(params, data).map(|(_, acc)| acc)
}

fn train_loss(params: &ParamSet, data: &Dataset) -> Result<f64> {
    evaluate(params, data).map(|(loss, _)| loss)
}

/// Every set must equal the first one bit for bit.
pub fn verify_consensus<'a>(
    sets: impl IntoIterator<Item = (PeerId, &'a ParamSet)>,
) -> Result<()> {
    let mut iter = sets.into_iter();
    let Some((ref_id, reference)) = iter.next() else {
        return Ok(());
    };
    for (id, params) in iter {
        if let Some((layer, part, index)) = reference.first_difference(params) {
            return Err(Error::ConsensusViolation {
                reference: ref_id.0,
                peer: id.0,
                layer,
                part,
                index,
            });
        }
    }
    Ok(())
}

struct Merged {
    weights: WeightVector,
    fallback_used: bool,
    params: ParamSet,
}

fn merge_at_peer(
    peer: &mut Peer,
    n: usize,
    strategy: StrategyId,
    options: &AggregationOptions,
) -> Result<Merged> {
    let own_params = peer.trained.take().ok_or(Error::MissingStats {
        what: "local model",
        index: peer.id.0 as usize,
    })?;
    let own_stats = peer.stats.clone().ok_or(Error::MissingStats {
        what: "local stats",
        index: peer.id.0 as usize,
    })?;
    let inbox = core::mem::take(&mut peer.inbox);
    if inbox.len() + 1 != n || inbox.contains_key(&peer.id) {
        return Err(Error::LengthMismatch {
            expected: n - 1,
            actual: inbox.len(),
        });
    }
    let own = Broadcast {
        params: own_params,
        stats: own_stats,
    };
    let mut ordered: Vec<(PeerId, &Broadcast)> = inbox.iter().map(|(id, b)| (*id, b)).collect();
    let pos = ordered.partition_point(|(id, _)| *id < peer.id);
    ordered.insert(pos, (peer.id, &own));

    let stats: Vec<ParticipantStats> = ordered.iter().map(|(_, b)| b.stats.clone()).collect();
    let weights = compute_weights(strategy, &stats, options)?;
    let sets: Vec<&ParamSet> = ordered.iter().map(|(_, b)| &b.params).collect();
    let params = aggregate(&sets, &weights.vector)?;
    Ok(Merged {
        weights: weights.vector,
        fallback_used: weights.fallback_used,
        params,
    })
}

/// One full protocol round. On success every peer holds the same federated
/// parameters.
pub fn run_round<E: Executor>(
    peers: &mut [Peer],
    settings: &FederationSettings,
    round: usize,
    executor: &E,
) -> Result<RoundRecord> {
    let n = peers.len();
    if n < 2 {
        return Err(Error::TooFewParticipants(n));
    }
    verify_consensus(peers.iter().map(|p| (p.id, &p.current_params)))?;

    let dropout = settings.topology.dropout_rate();
    let local: Vec<Result<()>> = executor.map_peers(peers, |peer| {
        let train = &peer.partition.train;
        let trained = train_local(&peer.current_params, train, &settings.training, dropout, &mut peer.rng)?;
        let acc = test_accuracy(&trained, &peer.partition.test)?;
        let local_loss = train_loss(&trained, train)?;
        peer.stats = Some(ParticipantStats::new(
            train.len(),
            acc,
            local_loss,
            peer.prior_global_loss,
        )?);
        peer.trained = Some(trained);
        Ok(())
    });
    local.into_iter().collect::<Result<()>>()?;

    // Simulated lossless broadcast: every peer's message lands in every other
    // peer's inbox.
    let messages: Vec<(PeerId, Broadcast)> = peers
        .iter()
        .map(|p| {
            (
                p.id,
                Broadcast {
                    params: p.trained.clone().expect("trained above"),
                    stats: p.stats.clone().expect("stats set above"),
                },
            )
        })
        .collect();
    for peer in peers.iter_mut() {
        for (from, msg) in &messages {
            if *from != peer.id {
                peer.inbox.insert(*from, msg.clone());
            }
        }
    }

    let merged: Vec<Result<Merged>> = executor.map_peers(peers, |peer| {
        merge_at_peer(peer, n, settings.strategy, &settings.aggregation)
    });
    let merged = merged.into_iter().collect::<Result<Vec<_>>>()?;
    verify_consensus(peers.iter().map(|p| p.id).zip(merged.iter().map(|m| &m.params)))?;
    if merged.iter().any(|m| m.weights != merged[0].weights) {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: format!("peers computed different weights in round {round}"),
        });
    }

    let evaluated: Vec<Result<PeerMetrics>> = {
        let merged = &merged;
        executor.map_peers(peers, |peer| {
            let idx = (peer.id.0 - 1) as usize;
            peer.current_params = merged[idx].params.clone();
            let global_loss = train_loss(&peer.current_params, &peer.partition.train)?;
            let federated_accuracy = test_accuracy(&peer.current_params, &peer.partition.test)?;
            let stats = peer.stats.as_ref().expect("stats set above");
            let m = PeerMetrics {
                peer: peer.id.0,
                test_accuracy: stats.test_accuracy,
                local_loss: stats.local_loss,
                global_loss,
                contribution: stats.contribution,
                federated_accuracy,
            };
            peer.prior_global_loss = Some(global_loss);
            Ok(m)
        })
    };
    let metrics = RoundMetrics::new(evaluated.into_iter().collect::<Result<Vec<_>>>()?);

    let first = merged.into_iter().next().expect("n >= 2");
    Ok(RoundRecord {
        round,
        strategy: settings.strategy,
        weights: first.weights,
        metrics,
        consensus_ok: true,
        fallback_used: first.fallback_used,
    })
}

/// Stop on target accuracy, round budget, or stalled mean accuracy, in that
/// order of precedence.
pub fn check_termination(history: &[RoundRecord], criteria: &TerminationCriteria) -> Termination {
    let Some(latest) = history.last() else {
        return Termination::Continue;
    };
    let means: Vec<f64> = history
        .iter()
        .map(|r| r.metrics.mean_federated_accuracy())
        .collect();
    if let Some(target) = criteria.target_mean_accuracy {
        if latest.metrics.mean_federated_accuracy() >= target {
            return Termination::Stop(StopReason::TargetReached);
        }
    }
    if history.len() >= criteria.max_rounds {
        return Termination::Stop(StopReason::MaxRounds);
    }
    if criteria.patience > 0 {
        let best = means
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m > means[best] { i } else { best });
        if history.len() - 1 - best >= criteria.patience {
            return Termination::Stop(StopReason::Patience);
        }
    }
    Termination::Continue
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub final_params: Vec<ParamSet>,
    pub history: Vec<RoundRecord>,
    /// Accuracy of the last federated model on each peer's test rows.
    pub final_accuracy: Vec<f64>,
    /// Accuracy of each peer's first locally trained model, before any merge.
    pub baseline_accuracy: Vec<f64>,
    pub stop_reason: StopReason,
}

impl FederationOutcome {
    pub fn mean_final_accuracy(&self) -> f64 {
        mean(self.final_accuracy.iter().copied())
    }

    pub fn mean_baseline_accuracy(&self) -> f64 {
        mean(self.baseline_accuracy.iter().copied())
    }
}

pub fn run_federation<E: Executor>(
    partitions: Vec<Partition>,
    settings: &FederationSettings,
    criteria: &TerminationCriteria,
    seed: u64,
    executor: &E,
) -> Result<FederationOutcome> {
    criteria.validate()?;
    let mut peers = initiate(&settings.topology, partitions, seed)?;
    let mut history: Vec<RoundRecord> = Vec::new();
    let stop_reason = loop {
        let record = run_round(&mut peers, settings, history.len() + 1, executor)?;
        history.push(record);
        if let Termination::Stop(reason) = check_termination(&history, criteria) {
            break reason;
        }
    };
    let first = &history[0].metrics.peers;
    let last = &history[history.len() - 1].metrics.peers;
    Ok(FederationOutcome {
        baseline_accuracy: first.iter().map(|p| p.test_accuracy).collect(),
        final_accuracy: last.iter().map(|p| p.federated_accuracy).collect(),
        final_params: peers.into_iter().map(|p| p.current_params).collect(),
        history,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::partition::{partition, PartitionOptions, SplitScheme};
    use alloc::string::ToString;
    use alloc::vec;

    fn blobs(rows: usize, seed: u64) -> Dataset {
        let mut rng = RngStream::new(seed, 99);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..rows {
            let y = (i % 2) as u8;
            let shift = if y == 1 { 1.0 } else { -1.0 };
            data.push(shift + rng.uniform(-1.0, 1.0));
            data.push(-shift + rng.uniform(-1.0, 1.0));
            data.push(rng.uniform(-1.0, 1.0));
            labels.push(y);
        }
        Dataset::new(
            Matrix::from_vec(rows, 3, data).unwrap(),
            labels,
            vec!["a".to_string(), "b".to_string(), "c".to_string()],
        )
        .unwrap()
    }

    fn settings(strategy: StrategyId) -> FederationSettings {
        FederationSettings {
            topology: Topology::new(vec![3, 6, 5, 4, 3, 1], 0.2).unwrap(),
            training: LocalTraining {
                epochs: 3,
                batch_size: 8,
                learning_rate: 0.05,
            },
            strategy,
            aggregation: AggregationOptions::default(),
        }
    }

    fn parts(n: usize) -> Vec<Partition> {
        partition(&blobs(200, 1), &SplitScheme::even(n, 4), &PartitionOptions::default()).unwrap()
    }

    #[test]
    fn initiate_shares_one_model() {
        let s = settings(StrategyId::FedAvg);
        let peers = initiate(&s.topology, parts(5), 42).unwrap();
        assert_eq!(peers.len(), 5);
        for p in &peers[1..] {
            assert!(p.current_params.bit_eq(&peers[0].current_params));
        }
        let again = initiate(&s.topology, parts(5), 42).unwrap();
        assert!(again[0].current_params.bit_eq(&peers[0].current_params));
    }

    #[test]
    fn initiate_needs_two_peers() {
        let s = settings(StrategyId::FedAvg);
        let mut one = parts(2);
        one.truncate(1);
        assert_eq!(
            initiate(&s.topology, one, 1).unwrap_err(),
            Error::TooFewParticipants(1)
        );
    }

    #[test]
    fn round_reaches_consensus_and_falls_back_first() {
        let s = settings(StrategyId::Contribution);
        let mut peers = initiate(&s.topology, parts(4), 3).unwrap();
        let r1 = run_round(&mut peers, &s, 1, &Sequential).unwrap();
        assert!(r1.fallback_used);
        assert_eq!(r1.weights.as_slice(), &[0.25; 4]);
        assert!(r1.metrics.peers.iter().all(|p| p.contribution.is_none()));
        let r2 = run_round(&mut peers, &s, 2, &Sequential).unwrap();
        assert!(!r2.fallback_used);
        assert!(r2.metrics.peers.iter().all(|p| p.contribution.is_some()));
        for p in &peers[1..] {
            assert!(p.current_params.bit_eq(&peers[0].current_params));
            assert!(p.inbox.is_empty());
        }
    }

    #[test]
    fn consensus_violation_is_reported() {
        let s = settings(StrategyId::FedAvg);
        let mut peers = initiate(&s.topology, parts(3), 3).unwrap();
        let w = peers[2].current_params.layers_mut()[1].weights.as_mut_slice();
        w[4] += 1e-12;
        let err = run_round(&mut peers, &s, 1, &Sequential).unwrap_err();
        assert_eq!(
            err,
            Error::ConsensusViolation {
                reference: 1,
                peer: 3,
                layer: 1,
                part: "weights",
                index: 4
            }
        );
    }

    #[test]
    fn termination_rules() {
        let record = |acc: f64| RoundRecord {
            round: 1,
            strategy: StrategyId::FedAvg,
            weights: WeightVector::uniform(2),
            metrics: RoundMetrics::new(vec![PeerMetrics {
                peer: 1,
                test_accuracy: acc,
                local_loss: 0.1,
                global_loss: 0.1,
                contribution: None,
                federated_accuracy: acc,
            }]),
            consensus_ok: true,
            fallback_used: false,
        };
        let one_round = TerminationCriteria {
            max_rounds: 1,
            ..TerminationCriteria::default()
        };
        assert_eq!(
            check_termination(&[record(0.5)], &one_round),
            Termination::Stop(StopReason::MaxRounds)
        );
        let target = TerminationCriteria {
            target_mean_accuracy: Some(0.9),
            ..TerminationCriteria::default()
        };
        assert_eq!(
            check_termination(&[record(0.95)], &target),
            Termination::Stop(StopReason::TargetReached)
        );
        assert_eq!(check_termination(&[record(0.85)], &target), Termination::Continue);
        let patience = TerminationCriteria {
            patience: 3,
            ..TerminationCriteria::default()
        };
        let h: Vec<_> = [0.8, 0.79, 0.78, 0.77].iter().map(|&a| record(a)).collect();
        assert_eq!(
            check_termination(&h, &patience),
            Termination::Stop(StopReason::Patience)
        );
        assert_eq!(check_termination(&h[..3], &patience), Termination::Continue);
        assert_eq!(check_termination(&[], &patience), Termination::Continue);
    }

    #[test]
    fn federation_is_replayable() {
        let s = settings(StrategyId::InvAccuracy);
        let criteria = TerminationCriteria {
            max_rounds: 3,
            ..TerminationCriteria::default()
        };
        let a = run_federation(parts(3), &s, &criteria, 8, &Sequential).unwrap();
        let b = run_federation(parts(3), &s, &criteria, 8, &Sequential).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), 3);
        assert_eq!(a.stop_reason, StopReason::MaxRounds);
        assert_eq!(a.baseline_accuracy.len(), 3);
        for (x, y) in a.final_params.iter().zip(&b.final_params) {
            assert!(x.bit_eq(y));
        }
    }
}
