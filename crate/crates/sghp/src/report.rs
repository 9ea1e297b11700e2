//! Emitted artifacts: training CSV + summary, metrics report, kernel grids.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! an exported file reproduces the original values exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sghp_core::eval::{KernelGrid, RecoveryRow};
use sghp_core::train::TrainReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("csv parse error at line {line}")]
    Csv { line: usize },
}

impl ReportError {
    pub fn code(&self) -> &'static str {
        match self {
            ReportError::Io(_) => "io_error",
            ReportError::Serialize(_) => "serialize_error",
            ReportError::Csv { .. } => "parse_error",
        }
    }
}

/// Per-epoch CSV: `epoch,train_loss,val_loss,seconds`.
///
/// The `seconds` column is wall-clock timing and is excluded from
/// byte-identity comparisons between runs.
pub fn train_report_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
    for (i, (train, val)) in report
        .train_loss
        .iter()
        .zip(report.val_loss.iter())
        .enumerate()
    {
        let _ = writeln!(out, "{},{},{},{}", i + 1, train, val, report.epoch_seconds[i]);
    }
    out
}

/// Summary counterpart of the CSV.
#[derive(Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub param_count: usize,
}

pub fn train_summary_toml(report: &TrainReport) -> Result<String, ReportError> {
    let summary = TrainSummary {
        epochs_run: report.epochs_run(),
        best_epoch: report.best_epoch,
        best_val_loss: report.val_loss[report.best_epoch - 1],
        param_count: report.param_count,
    };
    Ok(toml::to_string(&summary)?)
}

/// Metrics report document.
#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub f1_micro: f64,
    /// Average precision for the positive class; present only for K = 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aps: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recovery: Vec<RecoveryEntry>,
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct RecoveryEntry {
    pub source: usize,
    pub target: usize,
    pub linf: f64,
    pub learned_peak_time: f64,
    pub truth_peak_time: f64,
}

impl From<&RecoveryRow> for RecoveryEntry {
    fn from(r: &RecoveryRow) -> Self {
        RecoveryEntry {
            source: r.source,
            target: r.target,
            linf: r.linf,
            learned_peak_time: r.learned_peak_time,
            truth_peak_time: r.truth_peak_time,
        }
    }
}

pub fn metrics_toml(report: &MetricsReport) -> Result<String, ReportError> {
    Ok(toml::to_string(report)?)
}

/// Kernel grid CSV: header `time,learned[,truth]`, one row per grid point.
pub fn kernel_grid_csv(grid: &KernelGrid) -> String {
    let mut out = String::new();
    if grid.truth.is_some() {
        out.push_str("time,learned,truth\n");
    } else {
        out.push_str("time,learned\n");
    }
    for (i, t) in grid.times.iter().enumerate() {
        match &grid.truth {
            Some(truth) => {
                let _ = writeln!(out, "{},{},{}", t, grid.learned[i], truth[i]);
            }
            None => {
                let _ = writeln!(out, "{},{}", t, grid.learned[i]);
            }
        }
    }
    out
}

/// Parses a kernel grid CSV back (used by round-trip checks and plots).
pub fn parse_kernel_grid_csv(
    text: &str,
    source: usize,
    target: usize,
) -> Result<KernelGrid, ReportError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(ReportError::Csv { line: 1 })?;
    let has_truth = header.trim() == "time,learned,truth";
    if !has_truth && header.trim() != "time,learned" {
        return Err(ReportError::Csv { line: 1 });
    }
    let mut grid = KernelGrid {
        source,
        target,
        times: Vec::new(),
        learned: Vec::new(),
        truth: if has_truth { Some(Vec::new()) } else { None },
    };
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |offset: usize| -> Result<f64, ReportError> {
            fields
                .next()
                .and_then(|f| f.trim().parse().ok())
                .ok_or(ReportError::Csv { line: i + 1 + offset })
        };
        grid.times.push(next(1)?);
        grid.learned.push(next(1)?);
        if let Some(truth) = grid.truth.as_mut() {
            truth.push(next(1)?);
        }
    }
    Ok(grid)
}
