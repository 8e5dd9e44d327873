//! Result tables: per-(dataset, model) rows with one column per variant
//! under every metric, means across seeds, two-decimal display, and a
//! machine-readable dump keeping full precision.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::suite::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    /// centralized vs federated (the headline comparison)
    Mode,
    /// client counts of federated runs
    Clients,
    /// proximal coefficients of federated runs
    Mu,
}

const METRICS: [&str; 5] = ["Precision", "Recall", "AUROC", "AUPR", "F1"];

fn metric_value(m: &tabfed_core::eval::MetricsReport, name: &str) -> f64 {
    match name {
        "Precision" => m.precision,
        "Recall" => m.recall,
        "AUROC" => m.auroc,
        "AUPR" => m.aupr,
        "F1" => m.f1,
        _ => unreachable!(),
    }
}

/// Round to two decimals, half away from zero, on the decimal rendering of
/// the value (so 0.955 prints 0.96). Goes through a 10-decimal intermediate.
pub fn format2(x: f64) -> String {
    let neg = x < 0.0;
    let fixed = format!("{:.10}", x.abs());
    let (int_part, frac) = fixed.split_once('.').unwrap();
    let mut cents: u64 = int_part.parse::<u64>().unwrap() * 100 + frac[..2].parse::<u64>().unwrap();
    if frac.as_bytes()[2] >= b'5' {
        cents += 1;
    }
    let sign = if neg && cents > 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", cents / 100, cents % 100)
}

fn variant_key(row: &ResultRow, group_by: GroupBy) -> Option<String> {
    match group_by {
        GroupBy::Mode => Some(row.mode.clone()),
        GroupBy::Clients => row.n_clients.map(|c| c.to_string()),
        GroupBy::Mu => row.mu.map(|m| format!("{m}")),
    }
}

fn variant_order(group_by: GroupBy, variants: &BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = variants.iter().cloned().collect();
    match group_by {
        GroupBy::Mode => v.sort_by_key(|m| (m != "centralized", m.clone())),
        GroupBy::Clients => v.sort_by_key(|c| c.parse::<usize>().unwrap_or(usize::MAX)),
        GroupBy::Mu => v.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap_or(f64::MAX)
                .partial_cmp(&b.parse::<f64>().unwrap_or(f64::MAX))
                .unwrap()
        }),
    }
    v
}

#[derive(Debug, Serialize)]
struct CellDump {
    dataset: String,
    model: String,
    variant: String,
    seeds: Vec<u64>,
    precision: f64,
    recall: f64,
    auroc: f64,
    aupr: f64,
    f1: f64,
}

#[derive(Debug, Serialize)]
struct ReportDump {
    group_by: String,
    cells: Vec<CellDump>,
    failed_rows: usize,
}

/// Render the table text and the machine-readable JSON dump.
pub fn render_report(rows: &[ResultRow], group_by: GroupBy) -> (String, String) {
    let ok_rows: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.is_ok() && variant_key(r, group_by).is_some())
        .collect();
    let failed = rows.iter().filter(|r| !r.is_ok()).count();

    let variants: BTreeSet<String> = ok_rows
        .iter()
        .filter_map(|r| variant_key(r, group_by))
        .collect();
    let variants = variant_order(group_by, &variants);
    let groups: BTreeSet<(String, String)> = ok_rows
        .iter()
        .map(|r| (r.dataset.clone(), r.model.clone()))
        .collect();

    let mut cells: Vec<CellDump> = Vec::new();
    for (dataset, model) in &groups {
        for variant in &variants {
            let members: Vec<&&ResultRow> = ok_rows
                .iter()
                .filter(|r| {
                    &r.dataset == dataset
                        && &r.model == model
                        && variant_key(r, group_by).as_deref() == Some(variant)
                })
                .collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            let mean = |name: &str| {
                members
                    .iter()
                    .map(|r| metric_value(r.metrics.as_ref().unwrap(), name))
                    .sum::<f64>()
                    / n
            };
            cells.push(CellDump {
                dataset: dataset.clone(),
                model: model.clone(),
                variant: variant.clone(),
                seeds: members.iter().map(|r| r.seed).collect(),
                precision: mean("Precision"),
                recall: mean("Recall"),
                auroc: mean("AUROC"),
                aupr: mean("AUPR"),
                f1: mean("F1"),
            });
        }
    }

    // table text: two header rows, one line per (dataset, model)
    let cell_w = variants.iter().map(|v| v.len()).max().unwrap_or(4).max(5) + 1;
    let group_w = METRICS.len().max(1); // silence unused when METRICS changes
    let _ = group_w;
    let mut text = String::new();
    let label_w = groups
        .iter()
        .map(|(d, m)| d.len() + m.len() + 3)
        .max()
        .unwrap_or(16)
        .max(16);
    text.push_str(&format!("{:label_w$}", "dataset/model"));
    for metric in METRICS {
        let span = cell_w * variants.len();
        text.push_str(&format!(" | {metric:^span$}"));
    }
    text.push('\n');
    text.push_str(&format!("{:label_w$}", ""));
    for _ in METRICS {
        text.push_str(" | ");
        for v in &variants {
            text.push_str(&format!("{v:>w$}", w = cell_w - 1));
            text.push(' ');
        }
        while text.ends_with(' ') {
            text.pop();
        }
    }
    text.push('\n');
    text.push_str(&"-".repeat(label_w + METRICS.len() * (cell_w * variants.len() + 3)));
    text.push('\n');

    for (dataset, model) in &groups {
        text.push_str(&format!("{:label_w$}", format!("{dataset} / {model}")));
        for metric in METRICS {
            text.push_str(" | ");
            for variant in &variants {
                let cell = cells
                    .iter()
                    .find(|c| &c.dataset == dataset && &c.model == model && &c.variant == variant);
                let rendered = match cell {
                    Some(c) => format2(match metric {
                        "Precision" => c.precision,
                        "Recall" => c.recall,
                        "AUROC" => c.auroc,
                        "AUPR" => c.aupr,
                        "F1" => c.f1,
                        _ => unreachable!(),
                    }),
                    None => "-".to_string(),
                };
                text.push_str(&format!("{rendered:>w$} ", w = cell_w - 1));
            }
            while text.ends_with(' ') {
                text.pop();
            }
        }
        text.push('\n');
    }
    if failed > 0 {
        text.push_str(&format!("({failed} failed rows excluded)\n"));
    }

    let dump = ReportDump {
        group_by: match group_by {
            GroupBy::Mode => "mode",
            GroupBy::Clients => "clients",
            GroupBy::Mu => "mu",
        }
        .to_string(),
        cells,
        failed_rows: failed,
    };
    let json = serde_json::to_string_pretty(&dump).expect("report dump serializes");
    (text, json)
}
