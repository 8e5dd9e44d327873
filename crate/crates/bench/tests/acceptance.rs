//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `--nocapture`).
//!
//! Criteria 1-4 reproduce published reference numbers and therefore need
//! the real Thyroid / Arrhythmia CSVs, which this repository does not ship
//! (see docs/datasets.md). They look for the files under $TABFED_DATA_DIR
//! (default: <repo>/data) and print SKIP when absent. Criteria 5-10 run
//! unconditionally on synthetic data.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use tabfed_bench::config::{parse_config, Overrides};
use tabfed_bench::suite::run_suite;
use tabfed_core::data::{load_csv, prepare, split, subsample_raw, synthetic, DatasetSchema};
use tabfed_core::eval::{
    aupr, auroc, confusion_at, evaluate, optimal_threshold, LabeledScores, MetricsReport,
};
use tabfed_core::fed::{run_training, train_centralized, Aggregator, FedConfig};
use tabfed_core::models::{loss_and_gradient, ModelConfig, ModelKind};
use tabfed_core::numeric::Matrix;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn data_dir() -> PathBuf {
    std::env::var_os("TABFED_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| repo_root().join("data"))
}

fn schema_path(name: &str) -> PathBuf {
    repo_root().join("schemas").join(format!("{name}.json"))
}

fn epochs_budget() -> usize {
    std::env::var("TABFED_EPOCHS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(200)
}

/// Load a real dataset when its CSV is on disk.
fn real_split(name: &str, seed: u64) -> Option<tabfed_core::data::DataSplit> {
    let csv = data_dir().join(format!("{name}.csv"));
    if !csv.exists() {
        return None;
    }
    let schema = DatasetSchema::from_path(&schema_path(name)).expect("shipped schema parses");
    let (table, report) = load_csv(&csv, &schema).expect("dataset loads");
    for w in &report.warnings {
        eprintln!("[{name}] warning: {w}");
    }
    let (split, _) = prepare(&table, &schema, seed, 0.5).expect("dataset splits");
    Some(split)
}

fn skip(criterion: u32, name: &str) {
    println!(
        "criterion {criterion}: SKIP — {name} needs a real dataset under {} (see docs/datasets.md)",
        data_dir().display()
    );
}

fn small_config(kind: ModelKind) -> ModelConfig {
    let mut cfg = ModelConfig::new(kind).with_latent(2);
    cfg.svdd_output_features = 3;
    cfg
}

// ---- criterion 1: thyroid / dae, centralized ----

#[test]
fn acceptance_01_thyroid_dae_centralized() {
    let Some(split) = real_split("thyroid", 0) else {
        return skip(1, "thyroid/dae centralized");
    };
    let cfg = ModelConfig::new(ModelKind::Dae).with_latent(2);
    let (model, _) = train_centralized(&cfg, &split, epochs_budget(), 128, 0).unwrap();
    let m = evaluate(&model, &split).unwrap();
    println!(
        "criterion 1: auroc {:.3} (target 0.86 +- 0.05), f1 {:.3} (target 0.29 +- 0.07)",
        m.auroc, m.f1
    );
    assert!(
        (m.auroc - 0.86).abs() <= 0.05,
        "criterion 1 FAIL: auroc {:.3} outside 0.86 +- 0.05",
        m.auroc
    );
    assert!(
        (m.f1 - 0.29).abs() <= 0.07,
        "criterion 1 FAIL: f1 {:.3} outside 0.29 +- 0.07",
        m.f1
    );
    println!("criterion 1: PASS");
}

// ---- criterion 2: thyroid / dae, federated 3 clients ----

#[test]
fn acceptance_02_thyroid_dae_federated() {
    let Some(split) = real_split("thyroid", 0) else {
        return skip(2, "thyroid/dae federated");
    };
    let cfg = ModelConfig::new(ModelKind::Dae).with_latent(2);
    let epochs = epochs_budget();
    let fed = FedConfig {
        n_clients: 3,
        local_epochs: 10,
        rounds: (epochs / 10).max(1),
        aggregator: Aggregator::FedAvg,
        mu: 0.0,
        batch_size: 128,
        client_seeds: None,
    };
    let (model, _) = run_training(&cfg, &split, &fed, 0).unwrap();
    let m = evaluate(&model, &split).unwrap();
    println!(
        "criterion 2: auroc {:.3} (target 0.86 +- 0.05), f1 {:.3} (target 0.29 +- 0.07)",
        m.auroc, m.f1
    );
    assert!(
        (m.auroc - 0.86).abs() <= 0.05,
        "criterion 2 FAIL: auroc {:.3} outside 0.86 +- 0.05",
        m.auroc
    );
    assert!(
        (m.f1 - 0.29).abs() <= 0.07,
        "criterion 2 FAIL: f1 {:.3} outside 0.29 +- 0.07",
        m.f1
    );
    println!("criterion 2: PASS");
}

// ---- criterion 3: arrhythmia / memae, centralized (soft target) ----

#[test]
fn acceptance_03_arrhythmia_memae_centralized() {
    let Some(split) = real_split("arrhythmia", 0) else {
        return skip(3, "arrhythmia/memae centralized");
    };
    let mut cfg = ModelConfig::new(ModelKind::MemAe).with_latent(3);
    cfg.memae_memory_dim = 50;
    let (model, _) = train_centralized(&cfg, &split, epochs_budget(), 128, 0).unwrap();
    let m = evaluate(&model, &split).unwrap();
    println!("criterion 3: auroc {:.3} (target 0.81 +- 0.06)", m.auroc);
    if (m.auroc - 0.81).abs() <= 0.06 {
        println!("criterion 3: PASS");
    } else {
        // soft target: the reference architecture is under-specified, so a
        // miss documents the width sweep instead of rejecting the build
        println!(
            "criterion 3: SOFT-FAIL — auroc {:.3}; run the encoder-width sweep in docs/width_sweep.md and record the best setting",
            m.auroc
        );
    }
}

// ---- criterion 4: thyroid / deepsvdd client scaling direction ----

#[test]
fn acceptance_04_thyroid_svdd_client_scaling() {
    let Some(split) = real_split("thyroid", 0) else {
        return skip(4, "thyroid/deepsvdd client scaling");
    };
    let mut cfg = ModelConfig::new(ModelKind::DeepSvdd);
    cfg.svdd_output_features = 1;
    let epochs = epochs_budget();
    let run = |n_clients: usize| {
        let fed = FedConfig {
            n_clients,
            local_epochs: 10,
            rounds: (epochs / 10).max(1),
            aggregator: Aggregator::FedAvg,
            mu: 0.0,
            batch_size: 128,
            client_seeds: None,
        };
        let (model, _) = run_training(&cfg, &split, &fed, 0).unwrap();
        evaluate(&model, &split).unwrap().auroc
    };
    let auroc3 = run(3);
    let auroc7 = run(7);
    println!(
        "criterion 4: auroc 3 clients {:.3} vs 7 clients {:.3} (drop target >= 0.1)",
        auroc3, auroc7
    );
    assert!(
        auroc3 - auroc7 >= 0.1,
        "criterion 4 FAIL: degradation {:.3} < 0.1",
        auroc3 - auroc7
    );
    println!("criterion 4: PASS");
}

// ---- criterion 5: single-client federation == centralized, bit-exact ----

#[test]
fn acceptance_05_single_client_bit_identity() {
    let ds = synthetic::make_dataset(180, 20, 6, 50); // 200 samples
    let data = split(&ds, 50, 0.5).unwrap();
    let epochs = 6;
    for kind in ModelKind::ALL {
        let cfg = small_config(kind);
        // batch 16 stays below the federated small-shard fallback (train
        // shard is 90 rows -> cap 22), so both schedules coincide
        let fed = FedConfig {
            n_clients: 1,
            local_epochs: epochs,
            rounds: 1,
            aggregator: Aggregator::FedAvg,
            mu: 0.0,
            batch_size: 16,
            client_seeds: None,
        };
        let (fl, _) = run_training(&cfg, &data, &fed, 7).unwrap();
        let (central, _) = train_centralized(&cfg, &data, epochs, 16, 7).unwrap();
        assert!(
            fl.params().bits_eq(central.params()),
            "criterion 5 FAIL: {kind} single-client run is not bit-identical"
        );
        let m_fl = evaluate(&fl, &data).unwrap();
        let m_c = evaluate(&central, &data).unwrap();
        assert_eq!(m_fl, m_c, "criterion 5 FAIL: {kind} metrics diverge");
    }
    println!("criterion 5: PASS — all kinds bit-identical at rounds*local_epochs = E");
}

// ---- criterion 6: fedprox mu = 0 == fedavg, bit-exact ----

#[test]
fn acceptance_06_fedprox_mu_zero_degeneracy() {
    let ds = synthetic::make_dataset(180, 20, 6, 51);
    let data = split(&ds, 51, 0.5).unwrap();
    for kind in ModelKind::ALL {
        let cfg = small_config(kind);
        let avg = FedConfig {
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
            ..avg.clone()
        };
        let (a, _) = run_training(&cfg, &data, &avg, 13).unwrap();
        let (b, _) = run_training(&cfg, &data, &prox, 13).unwrap();
        assert!(
            a.params().bits_eq(b.params()),
            "criterion 6 FAIL: {kind} fedprox(mu=0) differs from fedavg"
        );
    }
    println!("criterion 6: PASS — fedprox mu=0 bit-identical to fedavg for all kinds");
}

// ---- criterion 7: metric oracles, 500 random instances ----

fn auroc_pair_oracle(data: &LabeledScores) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, (&si, &li)) in data.scores().iter().zip(data.labels()).enumerate() {
        for (&sj, &lj) in data.scores().iter().zip(data.labels()).skip(i + 1) {
            let (pos, neg) = match (li, lj) {
                (1, 0) => (si, sj),
                (0, 1) => (sj, si),
                _ => continue,
            };
            pairs += 1.0;
            if pos > neg {
                wins += 1.0;
            } else if pos == neg {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn aupr_sweep_oracle(data: &LabeledScores) -> f64 {
    let mut thresholds: Vec<f64> = data.scores().to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for &t in &thresholds {
        let c = confusion_at(data, t);
        area += (c.recall() - prev_recall) * c.precision();
        prev_recall = c.recall();
    }
    area
}

/// Quantile identical to the implementation's published definition.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * (p / 100.0).clamp(0.0, 1.0);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn threshold_window_oracle_best_f1(data: &LabeledScores) -> f64 {
    let mut sorted = data.scores().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p0 = 100.0 * (1.0 - data.anomaly_ratio());
    let delta = p0.min(100.0 - p0).min(20.0);
    let (lo, hi) = (quantile(&sorted, p0 - delta), quantile(&sorted, p0 + delta));
    let mut distinct = sorted;
    distinct.dedup();
    let mut candidates = vec![lo, hi];
    candidates.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.extend_from_slice(&distinct);
    candidates
        .into_iter()
        .filter(|&t| t >= lo && t <= hi)
        .map(|t| confusion_at(data, t).f1())
        .fold(0.0, f64::max)
}

#[test]
fn acceptance_07_metric_oracle_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let started = Instant::now();
    for instance in 0..500 {
        let data = loop {
            let n = rng.gen_range(2..=50usize);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(0.0..1.0f64) * 16.0).round() / 16.0)
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.35))).collect();
            let pos = labels.iter().filter(|&&l| l == 1).count();
            if pos > 0 && pos < n {
                break LabeledScores::new(scores, labels).unwrap();
            }
        };
        let got_auroc = auroc(&data).unwrap();
        let want_auroc = auroc_pair_oracle(&data);
        assert!(
            (got_auroc - want_auroc).abs() <= 1e-10,
            "criterion 7 FAIL: instance {instance} auroc {got_auroc} vs {want_auroc}"
        );
        let got_aupr = aupr(&data).unwrap();
        let want_aupr = aupr_sweep_oracle(&data);
        assert!(
            (got_aupr - want_aupr).abs() <= 1e-10,
            "criterion 7 FAIL: instance {instance} aupr {got_aupr} vs {want_aupr}"
        );
        let thr = optimal_threshold(&data).unwrap();
        let got_f1 = confusion_at(&data, thr).f1();
        let want_f1 = threshold_window_oracle_best_f1(&data);
        assert!(
            (got_f1 - want_f1).abs() <= 1e-10,
            "criterion 7 FAIL: instance {instance} best-f1 {got_f1} vs brute force {want_f1}"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "criterion 7 FAIL: oracle suite took {elapsed:?} (budget: sub-second)"
    );
    println!("criterion 7: PASS — 500 instances matched all oracles in {elapsed:?}");
}

// ---- criterion 8: finite-difference gradient suite ----

#[test]
fn acceptance_08_gradient_suite() {
    let started = Instant::now();
    for kind in ModelKind::ALL {
        for seed in 0..20u64 {
            let mut cfg = ModelConfig::new(kind).with_latent(2);
            cfg.svdd_output_features = 3;
            cfg.memae_memory_dim = 8;
            cfg.neutralad_num_transforms = 4;
            let mut model = tabfed_core::models::build_model(&cfg, 5, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
            let batch =
                Matrix::from_vec(4, 5, (0..20).map(|_| rng.gen_range(0.05..0.95)).collect())
                    .unwrap();
            if kind == ModelKind::DeepSvdd {
                tabfed_core::models::init_svdd_center(&mut model, &batch).unwrap();
            }
            let (_, grads) = loss_and_gradient(&model, &batch).unwrap();

            let mut params = model.params().values().to_vec();
            let n_params = params.len();
            for p in 0..n_params {
                let mut central = |h: f64| {
                    let orig = params[p];
                    let mut at = |v: f64| {
                        params[p] = v;
                        let mut probe = model.clone();
                        probe
                            .set_params(tabfed_core::numeric::ParamVector::new(params.clone()))
                            .unwrap();
                        let (loss, _) = loss_and_gradient(&probe, &batch).unwrap();
                        loss
                    };
                    let up = at(orig + h);
                    let down = at(orig - h);
                    params[p] = orig;
                    (up - down) / (2.0 * h)
                };
                let agrees = |numeric: f64| {
                    let diff = (grads[p] - numeric).abs();
                    diff <= 1e-6f64.max(1e-4 * grads[p].abs().max(numeric.abs()))
                };
                let numeric = central(1e-5);
                if !agrees(numeric) {
                    // a relu kink or shrinkage-mask flip inside the stencil
                    // is noise that vanishes as h shrinks; a wrong gradient
                    // does not
                    let refined = central(1e-7);
                    assert!(
                        agrees(refined),
                        "criterion 8 FAIL: {kind} seed {seed} param {p}: analytic {} vs fd {} / {}",
                        grads[p],
                        numeric,
                        refined
                    );
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "criterion 8 FAIL: gradient suite took {elapsed:?} (budget: sub-minute)"
    );
    println!("criterion 8: PASS — 5 kinds x 20 seeds finite-difference clean in {elapsed:?}");
}

// ---- criterion 9: split invariants on all four shipped schemas ----

fn stand_in_csv(schema: &DatasetSchema, n_rows: usize, ratio: f64, path: &PathBuf) {
    use std::io::Write;
    let mut rng = ChaCha8Rng::seed_from_u64(9000);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    let header: Vec<&str> = schema
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .chain(std::iter::once(schema.label_column.as_str()))
        .collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    let n_anom = ((n_rows as f64) * ratio).round() as usize;
    for row in 0..n_rows {
        let anomalous = row < n_anom;
        let mut cells: Vec<String> = Vec::with_capacity(schema.columns.len() + 1);
        for col in &schema.columns {
            match col.kind {
                tabfed_core::data::ColumnKind::Continuous => {
                    let base = if anomalous { 0.7 } else { 0.3 };
                    cells.push(format!("{:.6}", base + rng.gen_range(-0.2..0.2)));
                }
                tabfed_core::data::ColumnKind::Categorical => {
                    let vocab = ["a", "b", "c"];
                    cells.push(vocab[rng.gen_range(0..vocab.len())].to_string());
                }
            }
        }
        cells.push(if anomalous { "1".into() } else { "0".into() });
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
}

#[test]
fn acceptance_09_split_invariants_on_shipped_schemas() {
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("criterion9");
    std::fs::create_dir_all(&tmp).unwrap();
    for name in ["arrhythmia", "thyroid", "kdd10", "nslkdd"] {
        let schema = DatasetSchema::from_path(&schema_path(name)).unwrap();
        let expected = schema.expected.clone().unwrap_or_default();
        let real = data_dir().join(format!("{name}.csv"));
        let (mut table, source) = if real.exists() {
            let (t, _) = load_csv(&real, &schema).unwrap();
            (t, "real data")
        } else {
            let n = expected.n_samples.unwrap_or(2000).min(4000);
            let ratio = expected.anomaly_ratio.unwrap_or(0.1);
            let csv = tmp.join(format!("{name}.csv"));
            stand_in_csv(&schema, n, ratio, &csv);
            let (t, _) = load_csv(&csv, &schema).unwrap();
            (t, "synthetic stand-in")
        };
        // large intrusion sets: invariants are scale-free, trim for time
        if table.n_rows > 50_000 {
            table = subsample_raw(&table, 0.1, 0).unwrap();
        }
        let (split, _) = prepare(&table, &schema, 17, 0.5).unwrap();
        let total_anomalies = table.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(
            split.train.anomaly_count(),
            0,
            "criterion 9 FAIL: {name} train set contains anomalies"
        );
        assert_eq!(
            split.val.anomaly_count() + split.test.anomaly_count(),
            total_anomalies,
            "criterion 9 FAIL: {name} lost anomalies"
        );
        let gap = (split.val.anomaly_ratio() - split.test.anomaly_ratio()).abs();
        let bound = 1.0 / split.val.n_samples().min(split.test.n_samples()) as f64;
        assert!(
            gap <= bound,
            "criterion 9 FAIL: {name} stratification gap {gap} > {bound}"
        );
        // encoded width = continuous columns + one-hot vocabulary sizes;
        // the stand-in categoricals draw from a fixed 3-value vocabulary
        if source == "synthetic stand-in" && schema.n_categorical() > 0 {
            assert_eq!(
                split.train.n_features_encoded,
                schema.n_continuous() + 3 * schema.n_categorical(),
                "criterion 9 FAIL: {name} encoded width"
            );
        }
        println!("criterion 9: {name} ok ({source})");
    }
    println!("criterion 9: PASS — split invariants hold on all four schemas");
}

// ---- criterion 10: subsample mode runs end-to-end ----

#[test]
fn acceptance_10_subsample_mode_end_to_end() {
    let ws = common::workspace("criterion10", 2200, 300, 6);
    let cfg_path = common::config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "centralized"}, {"mode": "federated", "clients": [3], "local_epochs": 2}"#,
        4,
        "[0]",
    );
    let parsed = parse_config(
        &cfg_path,
        &Overrides {
            subsample: Some(0.1),
            ..Overrides::default()
        },
    )
    .unwrap();
    let outcome = run_suite(&parsed, 1).unwrap();
    assert_eq!(
        outcome.failures, 0,
        "criterion 10 FAIL: subsampled suite had failures"
    );
    assert_eq!(outcome.rows.len(), 2);
    for row in &outcome.rows {
        assert_eq!(row.subsample, Some(0.1));
        let m: &MetricsReport = row.metrics.as_ref().unwrap();
        // a 10% stratified subsample of 2500 rows leaves ~110 inliers for
        // training and a ~125-sample evaluation pool
        assert!(m.tp + m.fp + m.tn + m.fn_ >= 50);
    }
    println!("criterion 10: PASS — --subsample 0.1 pipeline ran end-to-end");
}
