//! Sweep harness for the IRS symbiotic radio optimizer.
//!
//! A sweep varies one scenario parameter over a grid, draws seeded channel
//! realizations, runs each requested scheme on each realization and writes
//! a long-form CSV with one row per run plus a summary CSV with per-cell
//! means. Rows are sorted before writing, so reruns with the same root seed
//! produce the same bytes whatever the thread schedule was.

pub mod mcverify;
pub mod profile;
pub mod selftest;
pub mod sweep;

pub use profile::Profile;
pub use sweep::{aggregate, run_sweep, Param, Row, SummaryRow, SweepResult, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error(transparent)]
    Config(#[from] symbiosr_core::scenario::ConfigError),
    #[error(transparent)]
    Scenario(#[from] symbiosr_core::scenario::ScenarioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
