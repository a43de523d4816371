//! Machine-readable report rows emitted by the pipeline commands.
//!
//! Every report file is line-delimited JSON: one run-manifest line written
//! by the caller, then one row per result. The row shapes live here so that
//! producers (the CLI) and consumers (tests, downstream tooling) share one
//! definition.

use serde::{Deserialize, Serialize};

use crate::datamodel::Day;
use crate::hansen_hurwitz::PrevalenceEstimate;
use crate::simulation::ArmDayOutcome;

/// Exact ground-truth prevalence of a (category, segment) pair, optionally
/// narrowed to one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub category: String,
    pub segment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<Day>,
    pub prevalence: f64,
}

/// One prevalence estimate for a (category, segment) pair, optionally
/// narrowed to one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub category: String,
    pub segment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<Day>,
    #[serde(flatten)]
    pub estimate: PrevalenceEstimate,
}

/// One treatment-minus-control daily delta with its pooled z test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub category: String,
    pub day: Day,
    pub control: f64,
    pub treatment: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub degenerate: bool,
}

/// One simulated day within one repeat of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub repeat: u64,
    pub day: Day,
    pub category: String,
    pub control: ArmDayOutcome,
    pub treatment: ArmDayOutcome,
    pub delta: f64,
}
