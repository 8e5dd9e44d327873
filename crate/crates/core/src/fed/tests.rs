use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{partition, split, synthetic, DataSplit};
use crate::models::{build_model, train_step, ModelConfig, ModelKind, Prox};
use crate::numeric::{l2_distance_sq, ParamVector};

use super::*;

fn pv(values: &[f64]) -> ParamVector {
    ParamVector::new(values.to_vec())
}

fn toy_split(seed: u64) -> DataSplit {
    let ds = synthetic::make_dataset(180, 20, 6, seed);
    split(&ds, seed, 0.5).unwrap()
}

fn dae_cfg() -> ModelConfig {
    ModelConfig::new(ModelKind::Dae).with_latent(2)
}

#[test]
fn fedavg_equal_sizes_is_plain_mean() {
    let a = pv(&[1.0, 2.0]);
    let b = pv(&[3.0, 4.0]);
    let avg = fedavg(&[&a, &b], &[5, 5]).unwrap();
    assert_eq!(avg.values(), &[2.0, 3.0]);
}

#[test]
fn fedavg_of_identical_states_is_that_state() {
    let a = pv(&[0.25, -1.5, 3.75]);
    let avg = fedavg(&[&a, &a, &a], &[3, 4, 5]).unwrap();
    assert_eq!(avg.values(), a.values());
}

#[test]
fn fedavg_weights_scale_contributions() {
    let a = pv(&[0.0]);
    let b = pv(&[4.0]);
    let avg = fedavg(&[&a, &b], &[1, 3]).unwrap();
    assert_eq!(avg.values(), &[3.0]);
}

#[test]
fn fedavg_single_client_is_identity() {
    let a = pv(&[0.1, 0.2, 0.3]);
    let avg = fedavg(&[&a], &[17]).unwrap();
    assert!(avg.bits_eq(&a));
}

#[test]
fn fedavg_rejects_layout_mismatch() {
    let a = pv(&[1.0]);
    let b = pv(&[1.0, 2.0]);
    assert!(fedavg(&[&a, &b], &[1, 1]).is_err());
}

#[test]
fn fedavg_coordinates_stay_in_client_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let n = rng.gen_range(2..6usize);
        let len = rng.gen_range(1..10usize);
        let states: Vec<ParamVector> = (0..n)
            .map(|_| ParamVector::new((0..len).map(|_| rng.gen_range(-3.0..3.0)).collect()))
            .collect();
        let weights: Vec<usize> = (0..n).map(|_| rng.gen_range(1..20usize)).collect();
        let refs: Vec<&ParamVector> = states.iter().collect();
        let avg = fedavg(&refs, &weights).unwrap();
        for i in 0..len {
            let lo = states
                .iter()
                .map(|s| s.values()[i])
                .fold(f64::INFINITY, f64::min);
            let hi = states
                .iter()
                .map(|s| s.values()[i])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(avg.values()[i] >= lo - 1e-12 && avg.values()[i] <= hi + 1e-12);
        }
    }
}

#[test]
fn effective_batch_shrinks_for_small_shards() {
    assert_eq!(effective_batch_size(128, 1000), 128);
    assert_eq!(effective_batch_size(128, 100), 25);
    assert_eq!(effective_batch_size(128, 20), 8);
    assert_eq!(effective_batch_size(128, 5), 5);
    assert_eq!(effective_batch_size(4, 1000), 4);
}

#[test]
fn fedprox_mu_zero_matches_fedavg_bitwise() {
    let data = toy_split(3);
    for kind in ModelKind::ALL {
        let mut cfg = ModelConfig::new(kind).with_latent(2);
        cfg.svdd_output_features = 3;
        cfg.memae_memory_dim = 8;
        cfg.neutralad_num_transforms = 4;
        let fed = FedConfig {
            n_clients: 3,
            local_epochs: 2,
            rounds: 2,
            aggregator: Aggregator::FedAvg,
            mu: 0.0,
            batch_size: 16,
            client_seeds: None,
        };
        let prox = FedConfig {
            aggregator: Aggregator::FedProx,
            ..fed.clone()
        };
        let (a, _) = run_training(&cfg, &data, &fed, 11).unwrap();
        let (b, _) = run_training(&cfg, &data, &prox, 11).unwrap();
        assert!(a.params().bits_eq(b.params()), "{kind} differs under mu=0");
    }
}

#[test]
fn two_client_single_step_round_is_the_mean_of_both_replayed_updates() {
    // 8 training rows over 2 clients: each shard fits one batch, so a round
    // is exactly one step per client
    let ds = synthetic::make_dataset(16, 4, 6, 5);
    let data = split(&ds, 5, 0.5).unwrap();
    let cfg = dae_cfg();
    let fed = FedConfig {
        n_clients: 2,
        local_epochs: 1,
        rounds: 1,
        aggregator: Aggregator::FedAvg,
        mu: 0.0,
        batch_size: 4096,
        client_seeds: None,
    };
    let seed = 21;
    let global = build_model(&cfg, 6, crate::seeding::mix(&[seed, tags::MODEL_INIT])).unwrap();
    let shards = partition(&data.train, 2, seed).unwrap();
    let seeds: Vec<u64> = (0..2).map(|c| derive_client_seed(seed, c)).collect();
    let (aggregated, log) = run_round(&global, &shards, &fed, 0, &seeds).unwrap();

    // replay both clients by hand
    let mut manual = Vec::new();
    for c in 0..2 {
        let shard = shards.get(c);
        let mut local = global.clone();
        local.reset_optimizer();
        let bs = effective_batch_size(fed.batch_size, shard.n_samples());
        assert_eq!(bs, shard.n_samples(), "expected a single-batch shard");
        let order = {
            let mut idx: Vec<usize> = (0..shard.n_samples()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_shuffle_seed(
                seeds[c], 0,
            )));
            idx
        };
        for chunk in order.chunks(bs) {
            train_step(&mut local, &shard.x.select_rows(chunk), None).unwrap();
        }
        manual.push(local);
    }
    let n0 = shards.get(0).n_samples() as f64;
    let n1 = shards.get(1).n_samples() as f64;
    for i in 0..aggregated.params().len() {
        let want =
            (manual[0].params().values()[i] * n0 + manual[1].params().values()[i] * n1) / (n0 + n1);
        let got = aggregated.params().values()[i];
        assert!(
            (got - want).abs() <= 1e-12,
            "coordinate {i}: {got} vs {want}"
        );
    }
    assert_eq!(log.client_losses.len(), 2);
}

#[test]
fn single_client_federation_equals_centralized_bitwise() {
    let data = toy_split(9);
    for kind in ModelKind::ALL {
        let mut cfg = ModelConfig::new(kind).with_latent(2);
        cfg.svdd_output_features = 3;
        cfg.memae_memory_dim = 8;
        cfg.neutralad_num_transforms = 4;
        let epochs = 4;
        // batch below the small-shard fallback threshold so both schedules agree
        let fed = FedConfig {
            n_clients: 1,
            local_epochs: epochs,
            rounds: 1,
            aggregator: Aggregator::FedAvg,
            mu: 0.0,
            batch_size: 16,
            client_seeds: None,
        };
        let (fl, _) = run_training(&cfg, &data, &fed, 33).unwrap();
        let (central, _) = train_centralized(&cfg, &data, epochs, 16, 33).unwrap();
        assert!(
            fl.params().bits_eq(central.params()),
            "{kind}: single-client federation drifted from centralized"
        );
    }
}

#[test]
fn run_training_is_deterministic_and_seed_sensitive() {
    let data = toy_split(1);
    let cfg = dae_cfg();
    let fed = FedConfig {
        n_clients: 3,
        local_epochs: 2,
        rounds: 3,
        aggregator: Aggregator::FedAvg,
        mu: 0.0,
        batch_size: 16,
        client_seeds: None,
    };
    let (a, logs_a) = run_training(&cfg, &data, &fed, 7).unwrap();
    let (b, logs_b) = run_training(&cfg, &data, &fed, 7).unwrap();
    assert!(a.params().bits_eq(b.params()));
    assert_eq!(logs_a.len(), logs_b.len());
    for (la, lb) in logs_a.iter().zip(&logs_b) {
        assert_eq!(la.client_losses, lb.client_losses);
        assert_eq!(la.global_param_norm, lb.global_param_norm);
    }
    let (c, _) = run_training(&cfg, &data, &fed, 8).unwrap();
    assert!(!a.params().bits_eq(c.params()), "seed change had no effect");
}

#[test]
fn fedprox_anchoring_tightens_with_mu() {
    // one round; distance between each client's final local weights and the
    // round-start global must not grow as mu grows
    let data = toy_split(13);
    let cfg = dae_cfg();
    let seed = 5;
    let global = build_model(&cfg, 6, crate::seeding::mix(&[seed, tags::MODEL_INIT])).unwrap();
    let shards = partition(&data.train, 3, seed).unwrap();
    let seeds: Vec<u64> = (0..3).map(|c| derive_client_seed(seed, c)).collect();

    let mut distances = Vec::new();
    for &mu in &[0.0, 0.01, 0.1, 1.0] {
        let fed = FedConfig {
            n_clients: 3,
            local_epochs: 5,
            rounds: 1,
            aggregator: Aggregator::FedProx,
            mu,
            batch_size: 8,
            client_seeds: None,
        };
        // reproduce the clients manually to read their pre-aggregation weights
        let mut total = 0.0;
        for c in 0..3 {
            let shard = shards.get(c);
            let mut local = global.clone();
            local.reset_optimizer();
            let bs = effective_batch_size(fed.batch_size, shard.n_samples());
            let anchor = global.params().clone();
            for epoch in 0..fed.local_epochs {
                let mut order: Vec<usize> = (0..shard.n_samples()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_shuffle_seed(
                    seeds[c],
                    epoch as u64,
                )));
                for chunk in order.chunks(bs) {
                    train_step(
                        &mut local,
                        &shard.x.select_rows(chunk),
                        Some(Prox {
                            mu,
                            global: &anchor,
                        }),
                    )
                    .unwrap();
                }
            }
            total += l2_distance_sq(local.params(), global.params())
                .unwrap()
                .sqrt();
        }
        distances.push(total);
    }
    for w in distances.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "distance grew with mu: {distances:?}");
    }
}

#[test]
fn explicit_client_seeds_are_honored() {
    let data = toy_split(4);
    let cfg = dae_cfg();
    let base = FedConfig {
        n_clients: 2,
        local_epochs: 2,
        rounds: 1,
        aggregator: Aggregator::FedAvg,
        mu: 0.0,
        batch_size: 16,
        client_seeds: Some(vec![100, 200]),
    };
    let (a, _) = run_training(&cfg, &data, &base, 3).unwrap();
    let (b, _) = run_training(&cfg, &data, &base, 3).unwrap();
    assert!(a.params().bits_eq(b.params()));
    let other = FedConfig {
        client_seeds: Some(vec![100, 201]),
        ..base.clone()
    };
    let (c, _) = run_training(&cfg, &data, &other, 3).unwrap();
    assert!(
        !a.params().bits_eq(c.params()),
        "client seeds had no effect"
    );
    let wrong_count = FedConfig {
        client_seeds: Some(vec![1]),
        ..base
    };
    assert!(run_training(&cfg, &data, &wrong_count, 3).is_err());
}

#[test]
fn client_numeric_failure_names_client_and_step() {
    let data = toy_split(2);
    let cfg = ModelConfig::new(ModelKind::Dsebm).with_latent(3);
    let fed = FedConfig {
        n_clients: 2,
        local_epochs: 1,
        rounds: 1,
        aggregator: Aggregator::FedAvg,
        mu: 0.0,
        batch_size: 16,
        client_seeds: None,
    };
    let seed = 4;
    let mut global = build_model(&cfg, 6, 0).unwrap();
    // poison the weights so the first training step overflows
    let huge = vec![1e160; global.params().len()];
    global.set_params(ParamVector::new(huge)).unwrap();
    let shards = partition(&data.train, 2, seed).unwrap();
    let seeds: Vec<u64> = (0..2).map(|c| derive_client_seed(seed, c)).collect();
    match run_round(&global, &shards, &fed, 0, &seeds) {
        Err(FedError::ClientFailure { client, round, .. }) => {
            assert_eq!(client, 0);
            assert_eq!(round, 0);
        }
        other => panic!("expected ClientFailure, got {other:?}"),
    }
}

#[test]
fn shard_count_must_match_clients() {
    let data = toy_split(6);
    let cfg = dae_cfg();
    let fed = FedConfig {
        n_clients: 3,
        local_epochs: 1,
        rounds: 1,
        aggregator: Aggregator::FedAvg,
        mu: 0.0,
        batch_size: 8,
        client_seeds: None,
    };
    let global = build_model(&cfg, 6, 0).unwrap();
    let shards = partition(&data.train, 2, 0).unwrap();
    assert!(run_round(&global, &shards, &fed, 0, &[1, 2, 3]).is_err());
}
