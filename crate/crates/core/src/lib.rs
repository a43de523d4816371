//! Surrogate-based prevalence measurement for A/B experiments.
//!
//! The pipeline estimates how prevalent a behavior (e.g. a policy violation)
//! is among the impressions served in an experiment arm, without labeling
//! the arm's traffic directly:
//!
//! 1. draw one PPSWOR sample of items from the full logs ([`sampling`]),
//! 2. label the sample and estimate prevalence per score bucket with a
//!    Hansen–Hurwitz estimator ([`hansen_hurwitz`], [`calibration`]),
//! 3. score any segment's impressions by combining its bucket shares with
//!    the calibrated bucket prevalences ([`surrogate`], [`simulation`]),
//! 4. aggregate per-day treatment−control deltas into decisions
//!    ([`inference`]).
//!
//! [`synthgen`] builds synthetic log/score/label worlds with known ground
//! truth so the whole chain is testable end to end.

pub mod calibration;
pub mod datamodel;
pub mod error;
pub mod hansen_hurwitz;
pub mod inference;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod simulation;
pub mod stats;
pub mod surrogate;
pub mod synthgen;

pub use error::{Error, Result};
