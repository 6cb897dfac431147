//! Report types and rendering. The JSON form regenerates byte-identically
//! from `(config, seed)`; anything non-deterministic (wall-clock timing)
//! stays out of it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dropin::DropInLayer;
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::nn::EpochStats;
use crate::selectors::{FeatureRanking, Method, SwpaRound};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub classes: usize,
    pub split_sizes: [usize; 3],
    pub warnings: Vec<String>,
}

/// One retrained subset network. `error` carries a divergence message when
/// the cell failed; the run as a whole continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub test_accuracy: Option<f64>,
    pub best_val_accuracy: Option<f64>,
    pub epochs_run: usize,
    pub history: Vec<EpochStats>,
    pub error: Option<String>,
}

impl CellReport {
    pub(crate) fn pending() -> CellReport {
        CellReport {
            test_accuracy: None,
            best_val_accuracy: None,
            epochs_run: 0,
            history: Vec::new(),
            error: None,
        }
    }
}

/// Final drop-in state and per-round record of a SWPA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwpaDetails {
    pub layer: DropInLayer,
    pub rounds: Vec<SwpaRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub ranking: FeatureRanking,
    pub top_indices: Vec<usize>,
    pub bottom_indices: Vec<usize>,
    pub top: CellReport,
    pub bottom: CellReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swpa: Option<SwpaDetails>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomRun {
    pub run: usize,
    pub indices: Vec<usize>,
    pub cell: CellReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomReport {
    pub worst: Option<f64>,
    pub average: Option<f64>,
    pub runs: Vec<RandomRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub selected_count: usize,
    pub methods: Vec<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomReport>,
    pub diverged: bool,
}

impl ExperimentReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Serialize any report value to pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::config(format!("report serialization: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fmt_acc(v: Option<f64>) -> String {
    match v {
        Some(a) => format!("{a:.4}"),
        None => "diverged".to_string(),
    }
}

/// Human-readable table of the experiment, mirroring the JSON content.
pub fn experiment_markdown(report: &ExperimentReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let ds = &report.dataset;
    writeln!(out, "# Feature selection experiment").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "Dataset: {} rows x {} features, {} classes; split {}/{}/{} (train/val/test).",
        ds.rows, ds.features, ds.classes, ds.split_sizes[0], ds.split_sizes[1], ds.split_sizes[2]
    )
    .unwrap();
    writeln!(
        out,
        "Selected per slice: {} features (fraction {}). Seed {}.",
        report.selected_count, report.config.fraction, report.config.seed
    )
    .unwrap();
    for w in &ds.warnings {
        writeln!(out, "- warning: {w}").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "| method | top accuracy | bottom accuracy |").unwrap();
    writeln!(out, "|--------|--------------|-----------------|").unwrap();
    for m in &report.methods {
        writeln!(
            out,
            "| {} | {} | {} |",
            m.method,
            fmt_acc(m.top.test_accuracy),
            fmt_acc(m.bottom.test_accuracy)
        )
        .unwrap();
    }
    if let Some(random) = &report.random {
        writeln!(out).unwrap();
        writeln!(
            out,
            "Random baseline over {} runs: worst {}, average {}.",
            random.runs.len(),
            fmt_acc(random.worst),
            fmt_acc(random.average)
        )
        .unwrap();
    }
    if report.diverged {
        writeln!(out).unwrap();
        writeln!(out, "At least one cell diverged; see the JSON report.").unwrap();
    }
    out
}
