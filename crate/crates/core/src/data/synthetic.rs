//! Seeded synthetic tabular datasets: a Gaussian-ish inlier cluster and a
//! shifted, wider anomaly cluster. Used by the invariant suites and for
//! end-to-end dry runs when no real dataset is on disk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::Matrix;

use super::Dataset;

/// Sum of uniforms; close enough to a normal draw and fully portable.
fn gaussianish(rng: &mut ChaCha8Rng) -> f64 {
    (0..4).map(|_| rng.gen_range(-0.5..0.5)).sum()
}

/// Inliers concentrate around 0.35 per coordinate; anomalies sit shifted
/// and spread out, so a reasonable detector separates them but not
/// trivially.
pub fn make_dataset(n_inliers: usize, n_anomalies: usize, n_features: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_inliers + n_anomalies;
    let mut data = Vec::with_capacity(n * n_features);
    for _ in 0..n_inliers {
        for j in 0..n_features {
            let center = 0.35 + 0.05 * (j % 3) as f64;
            data.push((center + 0.08 * gaussianish(&mut rng)).clamp(0.0, 1.0));
        }
    }
    for _ in 0..n_anomalies {
        for j in 0..n_features {
            let center = 0.75 - 0.06 * (j % 4) as f64;
            data.push((center + 0.18 * gaussianish(&mut rng)).clamp(0.0, 1.0));
        }
    }
    let mut y = vec![0u8; n_inliers];
    y.extend(vec![1u8; n_anomalies]);
    Dataset::new(Matrix::from_raw(n, n_features, data), y, n_features)
        .expect("synthetic construction is well-formed")
}

/// Write the dataset as a CSV file (`f0..fN` + `label`) compatible with the
/// generated schema from [`csv_schema_json`].
pub fn write_csv(dataset: &Dataset, path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let d = dataset.x.cols();
    let header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    for r in 0..dataset.n_samples() {
        let cells: Vec<String> = dataset.x.row(r).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{},{}", cells.join(","), dataset.y[r])?;
    }
    Ok(())
}

/// Matching schema document for [`write_csv`] output.
pub fn csv_schema_json(name: &str, n_features: usize) -> String {
    let columns: Vec<String> = (0..n_features)
        .map(|j| format!(r#"{{"name":"f{j}","kind":"continuous"}}"#))
        .collect();
    format!(
        r#"{{"name":"{name}","label_column":"label","anomaly_value":"1","columns":[{}]}}"#,
        columns.join(",")
    )
}
