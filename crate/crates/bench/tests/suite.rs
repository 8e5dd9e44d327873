//! Runner behavior: determinism across runs and thread counts, resume
//! semantics, failure isolation, and the CLI surface of the `tabfed`
//! binary.

mod common;

use std::process::Command;

use tabfed_bench::config::{parse_config, Overrides};
use tabfed_bench::report::{render_report, GroupBy};
use tabfed_bench::suite::{load_rows, run_suite, ResultRow};

use common::{config_json, workspace};

fn comparable(rows: &[ResultRow]) -> Vec<(String, String)> {
    // wall time varies run to run; everything else must be identical
    rows.iter()
        .map(|r| {
            (
                r.key.clone(),
                serde_json::to_string(&r.metrics).unwrap() + &format!("{:?}", r.error),
            )
        })
        .collect()
}

#[test]
fn suite_is_deterministic_across_runs_and_thread_counts() {
    let ws = workspace("det", 160, 20, 5);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}, {"kind": "memae", "latent_dim": 2, "memae_memory_dim": 8}"#,
        r#"{"mode": "centralized"}, {"mode": "federated", "clients": [2, 3], "local_epochs": 2}"#,
        4,
        "[0, 1]",
    );

    let run = |out: &str, threads: usize| {
        let parsed = parse_config(
            &cfg,
            &Overrides {
                out: Some(ws.root.join(out)),
                ..Overrides::default()
            },
        )
        .unwrap();
        run_suite(&parsed, threads).unwrap()
    };
    let a = run("out-a", 1);
    let b = run("out-b", 1);
    let c = run("out-c", 4);
    assert_eq!(a.rows.len(), 12); // 2 models x (1 + 2 fed variants) x 2 seeds
    assert_eq!(comparable(&a.rows), comparable(&b.rows));
    assert_eq!(comparable(&a.rows), comparable(&c.rows));
    assert_eq!(a.failures, 0);
}

#[test]
fn resuming_skips_completed_rows_and_preserves_results() {
    let ws = workspace("resume", 120, 16, 4);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "centralized"}"#,
        3,
        "[0, 1, 2]",
    );
    let parsed = parse_config(&cfg, &Overrides::default()).unwrap();
    let first = run_suite(&parsed, 1).unwrap();
    assert_eq!(first.rows.len(), 3);
    assert_eq!(first.skipped, 0);

    let second = run_suite(&parsed, 1).unwrap();
    assert_eq!(second.skipped, 3);
    assert_eq!(comparable(&first.rows), comparable(&second.rows));

    let persisted = load_rows(&parsed.output_dir).unwrap();
    assert_eq!(persisted.iter().filter(|r| r.is_ok()).count(), 3);
}

#[test]
fn failing_cells_record_rows_without_aborting_the_suite() {
    let ws = workspace("fail", 120, 16, 4);
    let body = format!(
        r#"{{
  "datasets": [
    {{"id": "synthetic", "csv": {csv:?}, "schema": {schema:?}}},
    {{"id": "ghost", "csv": "no-such-file.csv", "schema": {schema:?}}}
  ],
  "models": [{{"kind": "dae", "latent_dim": 2}}],
  "modes": [{{"mode": "centralized"}}],
  "total_epochs": 2,
  "seeds": [0],
  "batch_size": 16,
  "output_dir": {out:?}
}}"#,
        csv = ws.csv.to_str().unwrap(),
        schema = ws.schema.to_str().unwrap(),
        out = ws.out.to_str().unwrap(),
    );
    let cfg = ws.root.join("config.json");
    std::fs::write(&cfg, body).unwrap();
    let parsed = parse_config(&cfg, &Overrides::default()).unwrap();
    let outcome = run_suite(&parsed, 1).unwrap();
    assert_eq!(outcome.rows.len(), 2);
    assert_eq!(outcome.failures, 1);
    let failed = outcome.rows.iter().find(|r| !r.is_ok()).unwrap();
    assert_eq!(failed.dataset, "ghost");
    assert!(failed.error.as_deref().unwrap().contains("no-such-file"));
}

#[test]
fn run_directory_contains_the_full_audit_trail() {
    let ws = workspace("audit", 120, 16, 4);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "federated", "clients": [2], "local_epochs": 2}"#,
        4,
        "[0]",
    );
    let parsed = parse_config(&cfg, &Overrides::default()).unwrap();
    let outcome = run_suite(&parsed, 1).unwrap();
    assert_eq!(outcome.failures, 0);
    let out = &parsed.output_dir;
    assert!(out.join("config.json").exists());
    assert!(out.join("checksums.json").exists());
    assert!(out.join("results.jsonl").exists());
    assert!(out.join("results.csv").exists());
    let key = &outcome.rows[0].key;
    assert!(out
        .join("logs")
        .join(format!("{key}.rounds.jsonl"))
        .exists());
    let ckpt = out.join("checkpoints").join(format!("{key}.model.json"));
    assert!(ckpt.exists());
    // checkpoint loads back
    tabfed_core::models::load_model(&ckpt).unwrap();
    // round logs parse and count matches rounds
    let logs =
        std::fs::read_to_string(out.join("logs").join(format!("{key}.rounds.jsonl"))).unwrap();
    assert_eq!(logs.lines().count(), 2);
    // csv mirror has header + one line per row
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + outcome.rows.len());
}

#[test]
fn report_regeneration_is_byte_stable() {
    let ws = workspace("report", 140, 18, 4);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "centralized"}, {"mode": "federated", "clients": [2], "local_epochs": 2}"#,
        4,
        "[0, 1]",
    );
    let parsed = parse_config(&cfg, &Overrides::default()).unwrap();
    run_suite(&parsed, 1).unwrap();
    let rows = load_rows(&parsed.output_dir).unwrap();
    let (text_a, json_a) = render_report(&rows, GroupBy::Mode);
    let rows_again = load_rows(&parsed.output_dir).unwrap();
    let (text_b, json_b) = render_report(&rows_again, GroupBy::Mode);
    assert_eq!(text_a, text_b);
    assert_eq!(json_a, json_b);
    assert!(text_a.contains("synthetic / dae"));
}

#[test]
fn fedprox_mu_sweep_renders_one_column_per_mu() {
    let ws = workspace("musweep", 140, 18, 4);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "federated", "clients": [2], "aggregator": "fedprox", "mu": [0.01, 0.1, 1.0], "local_epochs": 2}"#,
        4,
        "[0]",
    );
    let parsed = parse_config(&cfg, &Overrides::default()).unwrap();
    let outcome = run_suite(&parsed, 1).unwrap();
    assert_eq!(outcome.rows.len(), 3);
    assert_eq!(outcome.failures, 0);
    let (text, json) = render_report(&outcome.rows, GroupBy::Mu);
    for mu in ["0.01", "0.1", "1"] {
        assert!(text.lines().nth(1).unwrap().contains(mu), "{text}");
    }
    assert!(json.matches("\"variant\"").count() == 3);
}

#[test]
fn shipped_configs_parse_and_expand() {
    let configs = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let parsed = parse_config(&path, &Overrides::default())
            .unwrap_or_else(|e| panic!("{} does not parse: {e:#}", path.display()));
        assert!(!parsed.specs.is_empty(), "{} expands empty", path.display());
        seen += 1;
    }
    assert!(seen >= 6, "expected the shipped config set, found {seen}");
}

// ---- CLI (binary) behavior ----

fn tabfed() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tabfed"))
}

#[test]
fn cli_validate_data_prints_statistics() {
    let ws = workspace("cli-validate", 100, 10, 4);
    let out = tabfed()
        .args(["validate-data"])
        .arg(&ws.schema)
        .arg(&ws.csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("110 rows"), "{stdout}");
    assert!(stdout.contains("10 anomalies"), "{stdout}");
}

#[test]
fn cli_exit_codes_follow_the_contract() {
    // config error -> 2
    let out = tabfed()
        .args(["run", "no-such-config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // clean run -> 0
    let ws = workspace("cli-run", 120, 16, 4);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "centralized"}"#,
        2,
        "[0]",
    );
    let out = tabfed().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // partial failure -> 1
    let body = format!(
        r#"{{
  "datasets": [
    {{"id": "synthetic", "csv": {csv:?}, "schema": {schema:?}}},
    {{"id": "ghost", "csv": "nope.csv", "schema": {schema:?}}}
  ],
  "models": [{{"kind": "dae", "latent_dim": 2}}],
  "modes": [{{"mode": "centralized"}}],
  "total_epochs": 2,
  "seeds": [0],
  "batch_size": 16,
  "output_dir": {out2:?}
}}"#,
        csv = ws.csv.to_str().unwrap(),
        schema = ws.schema.to_str().unwrap(),
        out2 = ws.root.join("out-partial").to_str().unwrap(),
    );
    let cfg2 = ws.root.join("config-partial.json");
    std::fs::write(&cfg2, body).unwrap();
    let out = tabfed().arg("run").arg(&cfg2).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_report_output_is_stable_across_invocations() {
    let ws = workspace("cli-report", 120, 16, 4);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "centralized"}"#,
        2,
        "[0]",
    );
    assert!(tabfed()
        .arg("run")
        .arg(&cfg)
        .output()
        .unwrap()
        .status
        .success());
    let first = tabfed().arg("report").arg(&ws.out).output().unwrap();
    let second = tabfed().arg("report").arg(&ws.out).output().unwrap();
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn cli_seed_and_subsample_overrides_apply() {
    let ws = workspace("cli-override", 400, 40, 4);
    let cfg = config_json(
        &ws,
        r#"{"kind": "dae", "latent_dim": 2}"#,
        r#"{"mode": "centralized"}"#,
        2,
        "[0, 1, 2]",
    );
    let out_dir = ws.root.join("out-override");
    let out = tabfed()
        .arg("run")
        .arg(&cfg)
        .args(["--seed", "9", "--subsample", "0.5", "--threads", "2"])
        .arg("--exhaustive-threshold")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = load_rows(&out_dir).unwrap();
    assert_eq!(rows.len(), 1); // single overridden seed
    assert_eq!(rows[0].seed, 9);
    assert_eq!(rows[0].subsample, Some(0.5));
    assert!(rows[0].spec.exhaustive_threshold);
}
