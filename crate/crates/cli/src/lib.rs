//! `qhj` command-line frontend: parse a scenario, run it, write curves and a
//! verification report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod scenario;

use std::time::Instant;

use serde_json::json;

pub use config::{parse_args, ParseError, Scenario, ScenarioConfig, UsageError};
pub use output::{write_bundle, OutputBundle};
pub use scenario::{run_scenario, Check, Curve, Outcome, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Compute(#[from] qhj_core::QhjError),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

/// Run the scenario and write its bundle.
pub fn execute(cfg: &ScenarioConfig) -> Result<OutputBundle, RunError> {
    let start = Instant::now();
    let outcome = run_scenario(cfg)?;
    let timings = json!({ "compute_s": start.elapsed().as_secs_f64() });
    Ok(write_bundle(cfg, &outcome, timings)?)
}
