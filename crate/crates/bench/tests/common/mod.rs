//! Shared fixtures for the bench integration tests: synthetic dataset files
//! and config documents in a scratch directory.

use std::fs;
use std::path::{Path, PathBuf};

use tabfed_core::data::synthetic;

pub struct Workspace {
    pub root: PathBuf,
    pub csv: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
}

/// Scratch directory holding one synthetic dataset (csv + schema) and an
/// output directory.
pub fn workspace(tag: &str, n_inliers: usize, n_anomalies: usize, n_features: usize) -> Workspace {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("ws-{tag}"));
    fs::remove_dir_all(&root).ok();
    fs::create_dir_all(&root).unwrap();
    let ds = synthetic::make_dataset(n_inliers, n_anomalies, n_features, 42);
    let csv = root.join("data.csv");
    synthetic::write_csv(&ds, &csv).unwrap();
    let schema = root.join("schema.json");
    fs::write(&schema, synthetic::csv_schema_json("synthetic", n_features)).unwrap();
    let out = root.join("out");
    Workspace {
        root,
        csv,
        schema,
        out,
    }
}

/// Minimal config over the workspace dataset.
pub fn config_json(
    ws: &Workspace,
    models: &str,
    modes: &str,
    epochs: usize,
    seeds: &str,
) -> PathBuf {
    let body = format!(
        r#"{{
  "datasets": [{{"id": "synthetic", "csv": {csv:?}, "schema": {schema:?}}}],
  "models": [{models}],
  "modes": [{modes}],
  "total_epochs": {epochs},
  "seeds": {seeds},
  "batch_size": 16,
  "output_dir": {out:?}
}}"#,
        csv = ws.csv.to_str().unwrap(),
        schema = ws.schema.to_str().unwrap(),
        out = ws.out.to_str().unwrap(),
    );
    let path = ws.root.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[allow(dead_code)]
pub fn read_to_string(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}
