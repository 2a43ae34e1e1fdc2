use peerfed_core::partition::{partition_rows, PartitionOptions, MIN_FRACTION, SMALL_FRACTION};
use peerfed_core::{
    aggregate, compute_weights, init_params, initiate, partition, run_federation, run_round,
    AggregationOptions, Dataset, FederationSettings, LocalTraining, Matrix, ParamSet,
    ParticipantStats, RngStream, Sequential, SplitKind, SplitScheme, StrategyId,
    TerminationCriteria, Topology,
};
use proptest::prelude::*;

fn stats_from(sizes: &[usize], accs: &[f64], contribs: &[f64]) -> Vec<ParticipantStats> {
    sizes
        .iter()
        .zip(accs)
        .zip(contribs)
        .map(|((&s, &a), &c)| ParticipantStats::with_contribution(s, a, c))
        .collect()
}

fn random_params(topology: &Topology, seed: u64) -> ParamSet {
    init_params(topology, &mut RngStream::new(seed, 0))
}

fn synthetic(rows: usize, features: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 1);
    let mut data = Vec::with_capacity(rows * features);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let y = rng.below(2) as u8;
        for f in 0..features {
            let signal = if f == 0 { f64::from(y) * 1.5 } else { 0.0 };
            data.push(signal + rng.uniform(-1.0, 1.0));
        }
        labels.push(y);
    }
    Dataset::new(
        Matrix::from_vec(rows, features, data).unwrap(),
        labels,
        (0..features).map(|i| format!("f{i}")).collect(),
    )
    .unwrap()
}

fn scheme_strategy() -> impl Strategy<Value = (SplitScheme, usize)> {
    (2usize..7, 0usize..3, any::<u64>(), 0usize..3, 300usize..700).prop_map(
        |(n, kind, seed, small, rows)| {
            let scheme = match kind {
                0 => SplitScheme::even(n, seed),
                1 => SplitScheme::random_uneven(n, seed),
                _ => SplitScheme::skewed(n, 1 + small % (n - 1), seed),
            };
            (scheme, rows)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partitions_are_a_disjoint_cover((scheme, rows) in scheme_strategy()) {
        let groups = partition_rows(rows, &scheme).unwrap();
        prop_assert_eq!(groups.len(), scheme.n);
        let mut seen = vec![false; rows];
        for g in &groups {
            prop_assert!(g.len() >= scheme.min_rows());
            for &r in g {
                prop_assert!(!seen[r]);
                seen[r] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));

        let fractions: Vec<f64> = groups.iter().map(|g| g.len() as f64 / rows as f64).collect();
        prop_assert!((fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        match scheme.kind {
            SplitKind::Even => {
                let min = groups.iter().map(Vec::len).min().unwrap();
                let max = groups.iter().map(Vec::len).max().unwrap();
                prop_assert!(max - min <= 1);
            }
            SplitKind::RandomUneven => {
                prop_assert!(fractions.iter().all(|&f| f >= MIN_FRACTION));
            }
            SplitKind::SkewedUneven => {
                let small = fractions
                    .iter()
                    .filter(|&&f| f > MIN_FRACTION && f < SMALL_FRACTION)
                    .count();
                prop_assert_eq!(small, scheme.min_small);
                prop_assert!(fractions.iter().all(|&f| f >= MIN_FRACTION));
            }
        }
        prop_assert_eq!(partition_rows(rows, &scheme).unwrap(), groups);
    }

    #[test]
    fn train_and_test_rows_are_disjoint((scheme, rows) in scheme_strategy()) {
        let data = synthetic(rows, 2, scheme.seed);
        let parts = partition(&data, &scheme, &PartitionOptions::default()).unwrap();
        let mut seen = vec![false; rows];
        for p in &parts {
            prop_assert!(p.test.len() >= 2 && !p.train.is_empty());
            for &r in p.train_rows.iter().chain(&p.test_rows) {
                prop_assert!(!seen[r]);
                seen[r] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        let total: f64 = parts.iter().map(|p| p.size_fraction).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn standardized_columns(rows in 5usize..200, seed in any::<u64>()) {
        let mut data = synthetic(rows, 4, seed);
        data.standardize();
        for c in 0..4 {
            let col: Vec<f64> = data.features.column(c).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn permuting_participants_permutes_weights(
        sizes in proptest::collection::vec(1usize..1000, 2..7),
        seed in any::<u64>(),
    ) {
        let n = sizes.len();
        let mut rng = RngStream::new(seed, 0);
        let accs: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
        let contribs: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 2.0)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let stats = stats_from(&sizes, &accs, &contribs);
        let permuted: Vec<ParticipantStats> = perm.iter().map(|&i| stats[i].clone()).collect();
        let topology = Topology::new(vec![3, 4, 3, 2, 2, 1], 0.0).unwrap();
        let sets: Vec<ParamSet> = (0..n as u64).map(|i| random_params(&topology, seed ^ i)).collect();
        let opts = AggregationOptions::default();
        for s in StrategyId::ALL {
            let w = compute_weights(s, &stats, &opts).unwrap();
            let wp = compute_weights(s, &permuted, &opts).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                let (a, b) = (wp.vector.as_slice()[k], w.vector.as_slice()[i]);
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
            }
            // Back in canonical order the inputs are identical, so the merge is too.
            let mut canonical = vec![0.0; n];
            for (k, &i) in perm.iter().enumerate() {
                canonical[i] = wp.vector.as_slice()[k];
            }
            let restored = peerfed_core::WeightVector::new(canonical).unwrap();
            let merged = aggregate(&sets, &w.vector).unwrap();
            let merged_restored = aggregate(&sets, &restored).unwrap();
            if restored == w.vector {
                prop_assert!(merged.bit_eq(&merged_restored));
            }
            for (a, b) in merged.values().zip(merged_restored.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn size_and_inverse_accuracy_are_monotone(
        sizes in proptest::collection::vec(1usize..1000, 2..8),
        accs in proptest::collection::vec(0.0f64..=1.0, 8),
    ) {
        let n = sizes.len();
        let stats = stats_from(&sizes, &accs[..n], &vec![0.1; n]);
        let opts = AggregationOptions::default();
        let ws = compute_weights(StrategyId::Size, &stats, &opts).unwrap();
        let wa = compute_weights(StrategyId::InvAccuracy, &stats, &opts).unwrap();
        for i in 0..n {
            for j in 0..n {
                if sizes[i] > sizes[j] {
                    prop_assert!(ws.vector.as_slice()[i] >= ws.vector.as_slice()[j]);
                }
                if accs[i] < accs[j] {
                    prop_assert!(wa.vector.as_slice()[i] >= wa.vector.as_slice()[j]);
                }
            }
        }
    }

    #[test]
    fn equal_sizes_make_size_equal_fed_avg(n in 2usize..12, size in 1usize..10_000) {
        let stats = stats_from(&vec![size; n], &vec![0.7; n], &vec![0.1; n]);
        let opts = AggregationOptions::default();
        let a = compute_weights(StrategyId::Size, &stats, &opts).unwrap();
        let b = compute_weights(StrategyId::FedAvg, &stats, &opts).unwrap();
        prop_assert_eq!(a.vector, b.vector);
    }

    #[test]
    fn equal_stats_make_every_strategy_fed_avg(
        n in 2usize..6,
        size in 1usize..500,
        acc in 0.05f64..=1.0,
        c in 0.001f64..1.0,
        seed in any::<u64>(),
    ) {
        let stats = stats_from(&vec![size; n], &vec![acc; n], &vec![c; n]);
        let topology = Topology::new(vec![4, 5, 4, 3, 2, 1], 0.0).unwrap();
        let sets: Vec<ParamSet> = (0..n as u64).map(|i| random_params(&topology, seed.wrapping_add(i))).collect();
        let opts = AggregationOptions::default();
        let reference = aggregate(&sets, &compute_weights(StrategyId::FedAvg, &stats, &opts).unwrap().vector).unwrap();
        for s in StrategyId::ALL {
            let merged = aggregate(&sets, &compute_weights(s, &stats, &opts).unwrap().vector).unwrap();
            // size_accuracy weights sum to `acc`, not 1.
            let scale = if s == StrategyId::SizeAccuracy { acc } else { 1.0 };
            for (a, b) in merged.values().zip(reference.values()) {
                prop_assert!((a / scale - b).abs() <= 1e-12, "{} {} {}", s, a, b);
            }
        }
    }
}

fn tiny_settings(strategy: StrategyId) -> FederationSettings {
    FederationSettings {
        topology: Topology::new(vec![4, 6, 5, 4, 3, 1], 0.2).unwrap(),
        training: LocalTraining {
            epochs: 2,
            batch_size: 8,
            learning_rate: 0.05,
        },
        strategy,
        aggregation: AggregationOptions::default(),
    }
}

#[test]
fn peers_agree_bit_for_bit_every_round() {
    let data = synthetic(260, 4, 11);
    for (k, scheme) in [
        SplitScheme::even(5, 3),
        SplitScheme::random_uneven(5, 4),
        SplitScheme::skewed(5, 2, 5),
    ]
    .iter()
    .enumerate()
    {
        let parts = partition(&data, scheme, &PartitionOptions::default()).unwrap();
        for strategy in StrategyId::ALL {
            let settings = tiny_settings(strategy);
            let mut peers = initiate(&settings.topology, parts.clone(), 90 + k as u64).unwrap();
            for round in 1..=4 {
                let record = run_round(&mut peers, &settings, round, &Sequential).unwrap();
                assert!(record.consensus_ok);
                assert_eq!(record.fallback_used, round == 1 && strategy.uses_contribution());
                assert_eq!(record.metrics.peers.len(), 5);
                for p in &peers[1..] {
                    assert!(p.current_params.bit_eq(&peers[0].current_params));
                    assert!(p.inbox.is_empty());
                }
            }
        }
    }
}

#[test]
fn history_never_exceeds_max_rounds() {
    let data = synthetic(120, 4, 12);
    let parts = partition(&data, &SplitScheme::even(3, 1), &PartitionOptions::default()).unwrap();
    for max_rounds in 1..=4 {
        let criteria = TerminationCriteria {
            max_rounds,
            patience: 2,
            target_mean_accuracy: None,
        };
        let out = run_federation(parts.clone(), &tiny_settings(StrategyId::Size), &criteria, 4, &Sequential).unwrap();
        assert!(out.history.len() <= max_rounds);
        assert_eq!(out.baseline_accuracy, out.history[0].metrics.peers.iter().map(|p| p.test_accuracy).collect::<Vec<_>>());
    }
}

#[test]
fn mirrored_peers_report_the_same_federated_accuracy() {
    let data = synthetic(150, 4, 13);
    let parts = partition(&data, &SplitScheme::even(2, 2), &PartitionOptions::default()).unwrap();
    let mut twin = parts[0].clone();
    twin.participant_id = 2;
    let criteria = TerminationCriteria {
        max_rounds: 3,
        ..TerminationCriteria::default()
    };
    let out = run_federation(vec![parts[0].clone(), twin], &tiny_settings(StrategyId::FedAvg), &criteria, 8, &Sequential).unwrap();
    for record in &out.history {
        let m = &record.metrics.peers;
        assert_eq!(m[0].federated_accuracy, m[1].federated_accuracy);
        assert_eq!(m[0].global_loss, m[1].global_loss);
    }
    assert_eq!(out.final_accuracy[0], out.final_accuracy[1]);
}

#[test]
fn two_peer_fed_avg_is_the_midpoint() {
    let data = synthetic(100, 4, 14);
    let parts = partition(&data, &SplitScheme::even(2, 9), &PartitionOptions::default()).unwrap();
    let settings = tiny_settings(StrategyId::FedAvg);
    let mut peers = initiate(&settings.topology, parts, 21).unwrap();
    // Replay each peer's local training on a copy to get `a` and `b`.
    let mut replay = peers.clone();
    let mut locals = Vec::new();
    for p in replay.iter_mut() {
        let mut rng = RngStream::new(21, u64::from(p.id.0));
        locals.push(
            peerfed_core::train_local(&p.current_params, &p.partition.train, &settings.training, 0.2, &mut rng).unwrap(),
        );
    }
    run_round(&mut peers, &settings, 1, &Sequential).unwrap();
    for ((m, a), b) in peers[0].current_params.values().zip(locals[0].values()).zip(locals[1].values()) {
        assert!((m - (a + b) / 2.0).abs() <= 1e-15 * (a.abs() + b.abs()).max(1.0));
    }
}
