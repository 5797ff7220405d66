//! Matching, recall/precision/character accuracy by difficulty tier, PR
//! curves, resolution sweeps and the end-to-end experiment runner.

pub mod experiment;
mod metrics;
mod pr;
mod report;
mod sweep;

pub use metrics::{char_accuracy, greedy_match, matched_gts, spearman};
pub use pr::{auc, default_thresholds, pr_curve, write_pr_csv, PrCurve, PrPoint};
pub use report::{evaluate, EvalReport, TierMetrics, DEFAULT_IOU};
pub use sweep::{sweep_resolution, write_sweep_csv, SweepRow, SweepTable, SweepVariable};
