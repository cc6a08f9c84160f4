//! Batch experiments: config files, run planning, parallel execution,
//! output files and hyperparameter sweeps.

mod config;
mod runner;
mod sweep;

pub use config::{ExperimentConfig, Scale, StreamEntry, TuningGrid, Windows, DEFAULT_WARMUP};
pub use runner::{
    execute, plan_runs, results_csv, write_outputs, DetectionRow, ExperimentOutcome, ResultRow,
    RunPlan, RESULT_COLUMNS,
};
pub use sweep::{expand_grid, rank_candidates, sweep, SweepOutcome, TuningRow};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// JSON with object keys sorted, so equal values always give equal text.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn fingerprint(text: &str) -> String {
    Sha256::digest(text.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
