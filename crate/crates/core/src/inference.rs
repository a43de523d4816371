//! Day-level inference: aggregate daily treatment−control deltas into an
//! empirical confidence interval and an exact sign test.
//!
//! The sign test targets the regime the pooled z-test misses: a shift much
//! smaller than the calibration uncertainty but consistent in direction
//! across days. It depends only on the signs of the daily deltas, so it is
//! insensitive to the shared calibration level.

use serde::{Deserialize, Serialize};

use crate::datamodel::Day;
use crate::error::{Error, Result};
use crate::stats::{central_interval, mean, sign_test_p};

/// Ordered per-day deltas computed under one calibration snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyDeltaSeries {
    pub experiment: String,
    pub category: String,
    pub calibration_version: String,
    /// Strictly increasing by day.
    points: Vec<(Day, f64)>,
}

impl DailyDeltaSeries {
    pub fn new(
        experiment: impl Into<String>,
        category: impl Into<String>,
        calibration_version: impl Into<String>,
    ) -> Self {
        DailyDeltaSeries {
            experiment: experiment.into(),
            category: category.into(),
            calibration_version: calibration_version.into(),
            points: Vec::new(),
        }
    }

    /// Append one day's delta, enforcing day order and snapshot consistency.
    pub fn push(&mut self, day: Day, delta: f64, calibration_version: &str) -> Result<()> {
        if calibration_version != self.calibration_version {
            return Err(Error::domain(format!(
                "delta for {day} was computed under calibration version {calibration_version}, \
                 but the series uses {}; all deltas must share one snapshot",
                self.calibration_version
            )));
        }
        if let Some(&(last, _)) = self.points.last() {
            if day <= last {
                return Err(Error::domain(format!(
                    "days must be strictly increasing: {day} follows {last}"
                )));
            }
        }
        self.points.push((day, delta));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(Day, f64)] {
        &self.points
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, d)| d).collect()
    }
}

/// Central empirical interval over the daily deltas.
///
/// Quantiles interpolate linearly between order statistics at the
/// `(n+1)q` plotting position; level 1 returns `(min, max)`.
pub fn empirical_ci(series: &DailyDeltaSeries, level: f64) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::domain(format!(
            "empirical interval needs at least 2 days, got {}",
            series.len()
        )));
    }
    central_interval(&series.deltas(), level)
}

/// Sign counts and the exact two-sided binomial p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub n_pos: u64,
    pub n_neg: u64,
    pub n_zero: u64,
    pub p_value: f64,
}

/// Exact sign test over the series; zero deltas are excluded.
pub fn sign_test(series: &DailyDeltaSeries) -> Result<SignTest> {
    if series.is_empty() {
        return Err(Error::domain("sign test needs at least 1 day"));
    }
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    let mut n_zero = 0u64;
    for &(_, delta) in series.points() {
        if delta > 0.0 {
            n_pos += 1;
        } else if delta < 0.0 {
            n_neg += 1;
        } else {
            n_zero += 1;
        }
    }
    Ok(SignTest {
        n_pos,
        n_neg,
        n_zero,
        p_value: sign_test_p(n_pos, n_neg),
    })
}

/// Decision report over a daily delta series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub experiment: String,
    pub category: String,
    pub days: usize,
    pub mean_delta: f64,
    /// `mean_delta / baseline` when a baseline prevalence was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_delta: Option<f64>,
    /// 95% empirical interval; absent for single-day series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    pub n_pos: u64,
    pub n_neg: u64,
    pub n_zero: u64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    pub calibration_version: String,
}

/// Empirical interval level used in decision reports.
pub const REPORT_CI_LEVEL: f64 = 0.95;

/// Run the sign test and empirical interval and decide at level `alpha`.
///
/// `baseline` (e.g. the control arm's mean prevalence) turns the mean delta
/// into a relative effect.
pub fn decide(series: &DailyDeltaSeries, alpha: f64, baseline: Option<f64>) -> Result<InferenceReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    let test = sign_test(series)?;
    let deltas = series.deltas();
    let mean_delta = mean(&deltas);
    let (ci_low, ci_high) = if series.len() >= 2 {
        let (lo, hi) = central_interval(&deltas, REPORT_CI_LEVEL)?;
        (Some(lo), Some(hi))
    } else {
        (None, None)
    };
    let relative_delta = baseline.and_then(|b| (b != 0.0).then(|| mean_delta / b));
    Ok(InferenceReport {
        experiment: series.experiment.clone(),
        category: series.category.clone(),
        days: series.len(),
        mean_delta,
        relative_delta,
        ci_low,
        ci_high,
        n_pos: test.n_pos,
        n_neg: test.n_neg,
        n_zero: test.n_zero,
        p_value: test.p_value,
        alpha,
        significant: test.p_value < alpha,
        calibration_version: series.calibration_version.clone(),
    })
}
