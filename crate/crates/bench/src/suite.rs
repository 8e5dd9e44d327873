//! Suite execution: run every expanded spec, persist one structured record
//! per row (JSONL + CSV mirror), round logs and a model checkpoint per run,
//! and skip already-completed rows when resuming.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tabfed_core::data::{load_csv, prepare, subsample_raw, DataSplit, DatasetSchema};
use tabfed_core::eval::{evaluate_with, MetricsReport};
use tabfed_core::fed::{run_training_observed, train_centralized, FedConfig, RoundLog};
use tabfed_core::models::save_model;

use crate::config::{fnv1a64, ExperimentSpec, ModeKind, ParsedConfig};

/// One persisted result line, self-describing: the `spec` carries every
/// field needed to reproduce the run, the flat columns are for humans and
/// the CSV mirror.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub key: String,
    pub spec: ExperimentSpec,
    pub dataset: String,
    pub model: String,
    pub mode: String,
    pub n_clients: Option<usize>,
    pub aggregator: Option<String>,
    pub mu: Option<f64>,
    pub seed: u64,
    pub total_epochs: usize,
    pub rounds: Option<usize>,
    pub local_epochs: Option<usize>,
    pub batch_size: usize,
    pub subsample: Option<f64>,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
    pub wall_ms: u64,
    pub version: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.metrics.is_some()
    }
}

const CSV_HEADER: &str = "key,dataset,model,mode,n_clients,aggregator,mu,seed,total_epochs,rounds,local_epochs,batch_size,subsample,precision,recall,f1,auroc,aupr,threshold,tp,fp,tn,fn,error,wall_ms,version";

fn csv_field_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn csv_line(row: &ResultRow) -> String {
    let m = row.metrics.as_ref();
    let metric = |f: fn(&MetricsReport) -> String| m.map(f).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.key,
        row.dataset,
        row.model,
        row.mode,
        csv_field_opt(&row.n_clients),
        csv_field_opt(&row.aggregator),
        csv_field_opt(&row.mu),
        row.seed,
        row.total_epochs,
        csv_field_opt(&row.rounds),
        csv_field_opt(&row.local_epochs),
        row.batch_size,
        csv_field_opt(&row.subsample),
        metric(|m| m.precision.to_string()),
        metric(|m| m.recall.to_string()),
        metric(|m| m.f1.to_string()),
        metric(|m| m.auroc.to_string()),
        metric(|m| m.aupr.to_string()),
        metric(|m| m.threshold.to_string()),
        metric(|m| m.tp.to_string()),
        metric(|m| m.fp.to_string()),
        metric(|m| m.tn.to_string()),
        metric(|m| m.fn_.to_string()),
        row.error
            .as_deref()
            .map(|e| e.replace([',', '\n'], ";"))
            .unwrap_or_default(),
        row.wall_ms,
        row.version,
    )
}

/// Load the split for one spec: csv -> (optional stratified subsample) ->
/// class-based split with train-fitted scaling.
fn load_split(spec: &ExperimentSpec, quiet: bool) -> Result<DataSplit> {
    let schema = DatasetSchema::from_path(&spec.dataset.schema)
        .with_context(|| format!("schema {}", spec.dataset.schema.display()))?;
    let (mut table, report) = load_csv(&spec.dataset.csv, &schema)
        .with_context(|| format!("csv {}", spec.dataset.csv.display()))?;
    if !quiet {
        for w in &report.warnings {
            eprintln!("[{}] warning: {w}", spec.dataset.id);
        }
    }
    if let Some(fraction) = spec.subsample {
        table = subsample_raw(&table, fraction, spec.seed)?;
    }
    let (split, _) = prepare(&table, &schema, spec.seed, spec.val_fraction)?;
    Ok(split)
}

fn run_one(spec: &ExperimentSpec, out_dir: &Path) -> Result<MetricsReport> {
    let split = load_split(spec, false)?;
    let key = spec.key();
    let log_path = out_dir.join("logs").join(format!("{key}.rounds.jsonl"));
    let mut log_file =
        fs::File::create(&log_path).with_context(|| format!("create {}", log_path.display()))?;
    let mut write_log = |log: &RoundLog| {
        if let Ok(line) = serde_json::to_string(log) {
            let _ = writeln!(log_file, "{line}");
        }
    };

    let model = match (&spec.mode, &spec.fed) {
        (ModeKind::Centralized, _) => {
            let (model, logs) = train_centralized(
                &spec.model,
                &split,
                spec.total_epochs,
                spec.batch_size,
                spec.seed,
            )?;
            logs.iter().for_each(&mut write_log);
            model
        }
        (ModeKind::Federated, Some(fed)) => {
            let cfg = FedConfig {
                n_clients: fed.n_clients,
                local_epochs: fed.local_epochs,
                rounds: fed.rounds,
                aggregator: fed.aggregator,
                mu: fed.mu,
                batch_size: spec.batch_size,
                client_seeds: None,
            };
            let (model, _) =
                run_training_observed(&spec.model, &split, &cfg, spec.seed, &mut write_log)?;
            model
        }
        (ModeKind::Federated, None) => anyhow::bail!("federated spec without fed settings"),
    };

    let ckpt = out_dir
        .join("checkpoints")
        .join(format!("{key}.model.json"));
    save_model(&ckpt, &model).with_context(|| format!("checkpoint {}", ckpt.display()))?;

    Ok(evaluate_with(&model, &split, spec.exhaustive_threshold)?)
}

fn row_for(spec: &ExperimentSpec, outcome: Result<MetricsReport>, wall_ms: u64) -> ResultRow {
    let (metrics, error) = match outcome {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(format!("{e:#}"))),
    };
    ResultRow {
        key: spec.key(),
        spec: spec.clone(),
        dataset: spec.dataset.id.clone(),
        model: spec.model.kind.to_string(),
        mode: spec.mode.to_string(),
        n_clients: spec.fed.as_ref().map(|f| f.n_clients),
        aggregator: spec.fed.as_ref().map(|f| f.aggregator.to_string()),
        mu: spec.fed.as_ref().map(|f| f.mu),
        seed: spec.seed,
        total_epochs: spec.total_epochs,
        rounds: spec.fed.as_ref().map(|f| f.rounds),
        local_epochs: spec.fed.as_ref().map(|f| f.local_epochs),
        batch_size: spec.batch_size,
        subsample: spec.subsample,
        metrics,
        error,
        wall_ms,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn read_existing_rows(path: &Path) -> Vec<ResultRow> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

/// Read every persisted row of a run directory.
pub fn load_rows(dir: &Path) -> Result<Vec<ResultRow>> {
    let path = dir.join("results.jsonl");
    if !path.exists() {
        anyhow::bail!("no results.jsonl under {}", dir.display());
    }
    Ok(read_existing_rows(&path))
}

pub struct SuiteOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: usize,
    pub skipped: usize,
}

/// Execute a parsed config with `threads` workers. Rows append to
/// `results.jsonl` as they finish; the CSV mirror is rewritten sorted at
/// the end, so outputs are identical for any thread count.
pub fn run_suite(parsed: &ParsedConfig, threads: usize) -> Result<SuiteOutcome> {
    let out_dir = &parsed.output_dir;
    fs::create_dir_all(out_dir.join("logs"))?;
    fs::create_dir_all(out_dir.join("checkpoints"))?;
    fs::write(out_dir.join("config.json"), &parsed.raw)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    write_checksums(parsed, out_dir)?;

    let results_path = out_dir.join("results.jsonl");
    let existing = read_existing_rows(&results_path);
    let done: HashSet<String> = existing
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| r.key.clone())
        .collect();

    let todo: Vec<(usize, &ExperimentSpec)> = parsed
        .specs
        .iter()
        .enumerate()
        .filter(|(_, s)| !done.contains(&s.key()))
        .collect();
    let skipped = parsed.specs.len() - todo.len();
    if skipped > 0 {
        eprintln!("resuming: {skipped} completed rows skipped");
    }

    let results_file = Mutex::new(
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&results_path)?,
    );
    let collected: Mutex<Vec<(usize, ResultRow)>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let workers = threads.max(1).min(todo.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= todo.len() {
                    break;
                }
                let (grid_idx, spec) = todo[i];
                let started = Instant::now();
                let outcome = run_one(spec, out_dir);
                let row = row_for(spec, outcome, started.elapsed().as_millis() as u64);
                match &row.error {
                    None => eprintln!("done: {}", spec.label()),
                    Some(e) => eprintln!("FAILED: {} -- {e}", spec.label()),
                }
                {
                    let mut file = results_file.lock().unwrap();
                    if let Ok(line) = serde_json::to_string(&row) {
                        let _ = writeln!(file, "{line}");
                    }
                }
                collected.lock().unwrap().push((grid_idx, row));
            });
        }
    });

    let mut fresh = collected.into_inner().unwrap();
    fresh.sort_by_key(|(i, _)| *i);

    // full row set for this run directory, deterministic order
    let mut all: Vec<ResultRow> = existing
        .into_iter()
        .filter(|r| r.is_ok() && parsed.specs.iter().any(|s| s.key() == r.key))
        .collect();
    all.extend(fresh.into_iter().map(|(_, r)| r));
    all.sort_by(|a, b| a.key.cmp(&b.key));
    all.dedup_by(|a, b| a.key == b.key);

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in &all {
        csv.push_str(&csv_line(row));
        csv.push('\n');
    }
    fs::write(out_dir.join("results.csv"), csv)?;

    let failures = all.iter().filter(|r| !r.is_ok()).count();
    Ok(SuiteOutcome {
        rows: all,
        failures,
        skipped,
    })
}

fn write_checksums(parsed: &ParsedConfig, out_dir: &Path) -> Result<()> {
    let mut entries: Vec<(String, String)> = Vec::new();
    let mut seen = HashSet::new();
    for spec in &parsed.specs {
        if !seen.insert(spec.dataset.id.clone()) {
            continue;
        }
        let sum = match fs::read(&spec.dataset.csv) {
            Ok(bytes) => format!("{:016x}", fnv1a64(&bytes)),
            Err(_) => "unreadable".to_string(),
        };
        entries.push((spec.dataset.id.clone(), sum));
    }
    entries.sort();
    let map: serde_json::Map<String, serde_json::Value> = entries
        .into_iter()
        .map(|(k, v)| (k, serde_json::Value::String(v)))
        .collect();
    fs::write(
        out_dir.join("checksums.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(map))?,
    )?;
    Ok(())
}

/// Validate one (schema, csv) pair; returns the human-readable findings.
pub fn validate_data(schema_path: &Path, csv_path: &Path) -> Result<Vec<String>> {
    let schema = DatasetSchema::from_path(schema_path)?;
    let (_, report) = load_csv(csv_path, &schema)?;
    let mut lines = vec![format!(
        "{}: {} rows, {} anomalies (ratio {:.4})",
        schema.name,
        report.n_rows,
        report.n_anomalies,
        report.n_anomalies as f64 / report.n_rows as f64
    )];
    lines.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(lines)
}
