//! Results layout and CSV output.
//!
//! ```text
//! <root>/runs/<config-hash>/config.json
//! <root>/runs/<config-hash>/<seed>/report.json
//! <root>/runs/<config-hash>/<seed>/timing.json
//! <root>/runs/<config-hash>/<seed>/model/{model.ckpt,manifest.json}
//! <root>/runs/<config-hash>/aggregate.csv
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hcgnn::tasks::TestMetrics;

use crate::error::CliError;

pub const RESULTS_ENV: &str = "HCGNN_RESULTS";

/// Results root: the explicit path, else `$HCGNN_RESULTS`, else `./results`.
pub fn results_root(explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(RESULTS_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("results")),
    }
}

pub fn run_dir(root: &Path, hash: &str) -> PathBuf {
    root.join("runs").join(hash)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_file(path, &(text + "\n"))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const METRICS: [&str; 5] = ["micro_f1", "macro_f1", "accuracy", "auc", "nmi"];

fn metric(t: &TestMetrics, name: &str) -> Option<f64> {
    match name {
        "micro_f1" => t.micro_f1,
        "macro_f1" => t.macro_f1,
        "accuracy" => t.accuracy,
        "auc" => t.auc,
        "nmi" => t.nmi,
        _ => None,
    }
}

/// One header line and one row: run count, then mean and std of every test
/// metric. Metrics a task does not produce are left empty.
pub fn aggregate_csv(task: &str, tests: &[&TestMetrics]) -> String {
    let mut header = String::from("task,runs");
    let mut row = format!("{task},{}", tests.len());
    for name in METRICS {
        let _ = write!(header, ",{name}_mean,{name}_std");
        let xs: Vec<f64> = tests.iter().filter_map(|t| metric(t, name)).collect();
        if xs.len() == tests.len() && !xs.is_empty() {
            let (m, s) = mean_std(&xs);
            let _ = write!(row, ",{m},{s}");
        } else {
            row.push_str(",,");
        }
    }
    format!("{header}\n{row}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_has_all_columns() {
        let t = TestMetrics {
            micro_f1: Some(0.5),
            ..Default::default()
        };
        let csv = aggregate_csv("node-class", &[&t, &t]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("task,runs,micro_f1_mean,micro_f1_std"));
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert!(lines[1].starts_with("node-class,2,0.5,0,"));
    }
}
