//! Hansen–Hurwitz estimation of target-category impression totals and
//! prevalence from a labeled PPSWOR sample.
//!
//! For a sample of `n` items with labels `Z_t`, segment impressions
//! `I_t(S)`, and sampling probabilities `p_t = w_t / total_weight`, the
//! total estimator is `T = (1/n) * sum_t Z_t * I_t(S) / p_t` and prevalence
//! is `T` divided by the segment's total impressions. The with-replacement
//! variance form is used as an approximation for the without-replacement
//! design, which coverage tests validate at small sampling fractions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{ImpressionRecord, LabelSource, Segment};
use crate::error::{Error, Result};
use crate::sampling::DrawnSample;
use crate::stats::normal_two_sided_p;

/// Normal critical value for the fixed 95% confidence level.
pub const Z_95: f64 = 1.96;

/// One sampled item carrying everything the estimator needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSampleItem {
    pub item: String,
    /// Binary target-category label `Z`.
    pub label: bool,
    /// Impressions of this item inside the segment under estimation.
    pub segment_impressions: u64,
    /// Full-population sampling probability `p` in (0, 1].
    pub sampling_probability: f64,
}

/// Which estimator produced a [`PrevalenceEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    HansenHurwitz,
    Surrogate,
    Simulation,
}

/// Point estimate with variance and a 95% normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    pub method: EstimateMethod,
    /// Clamped to [0, 1].
    pub point: f64,
    /// The estimate before clamping (Hansen–Hurwitz totals can exceed the
    /// segment's impressions under sampling noise).
    pub raw_point: f64,
    /// `None` when the sample was too small to estimate variance (n < 2).
    pub variance: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Labeled-sample size behind the estimate.
    pub n: usize,
    /// Version of the calibration table the estimate depends on, when any
    /// (surrogate and simulation estimates; direct estimates carry none).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_version: Option<String>,
}

impl PrevalenceEstimate {
    /// Assemble an estimate from a raw point and optional variance,
    /// clamping the point and interval into [0, 1].
    pub fn from_raw(
        method: EstimateMethod,
        raw_point: f64,
        variance: Option<f64>,
        n: usize,
    ) -> Self {
        let point = raw_point.clamp(0.0, 1.0);
        let (ci_low, ci_high) = match variance {
            Some(v) => {
                let half = Z_95 * v.sqrt();
                ((point - half).clamp(0.0, 1.0), (point + half).clamp(0.0, 1.0))
            }
            None => (point, point),
        };
        PrevalenceEstimate {
            method,
            point,
            raw_point,
            variance,
            ci_low,
            ci_high,
            n,
            calibration_version: None,
        }
    }
}

fn hh_terms(sample: &[LabeledSampleItem]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::domain("Hansen-Hurwitz estimation needs a non-empty sample"));
    }
    sample
        .iter()
        .map(|it| {
            if !(it.sampling_probability > 0.0) {
                return Err(Error::domain(format!(
                    "item {} has non-positive sampling probability {}",
                    it.item, it.sampling_probability
                )));
            }
            Ok(if it.label {
                it.segment_impressions as f64 / it.sampling_probability
            } else {
                0.0
            })
        })
        .collect()
}

/// Estimated total target-category impressions in the segment.
pub fn hh_total(sample: &[LabeledSampleItem]) -> Result<f64> {
    let terms = hh_terms(sample)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// With-replacement variance of the total estimator; `None` for n < 2.
pub fn hh_total_variance(sample: &[LabeledSampleItem]) -> Result<Option<f64>> {
    let terms = hh_terms(sample)?;
    Ok(variance_of_terms(&terms))
}

fn variance_of_terms(terms: &[f64]) -> Option<f64> {
    let n = terms.len();
    if n < 2 {
        return None;
    }
    let mean = terms.iter().sum::<f64>() / n as f64;
    let ss: f64 = terms.iter().map(|y| (y - mean) * (y - mean)).sum();
    Some(ss / (n as f64 * (n - 1) as f64))
}

/// Prevalence estimate for the segment behind `sample`.
///
/// `total_segment_impressions` must come from the full logs, not the sample.
pub fn hh_prevalence(
    sample: &[LabeledSampleItem],
    total_segment_impressions: u64,
) -> Result<PrevalenceEstimate> {
    if total_segment_impressions == 0 {
        return Err(Error::domain(
            "prevalence is undefined on a segment with zero impressions",
        ));
    }
    let terms = hh_terms(sample)?;
    let n = terms.len();
    let total = terms.iter().sum::<f64>() / n as f64;
    let denom = total_segment_impressions as f64;
    let raw_point = total / denom;
    let variance = variance_of_terms(&terms).map(|v| v / (denom * denom));
    Ok(PrevalenceEstimate::from_raw(
        EstimateMethod::HansenHurwitz,
        raw_point,
        variance,
        n,
    ))
}

/// Result of comparing two prevalence estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTest {
    pub delta: f64,
    pub z: f64,
    pub p_value: f64,
    /// Set when both variances are zero but the points differ, making the
    /// z-statistic formally infinite.
    pub degenerate: bool,
}

/// Two-sided z-test on the difference `a.point - b.point`.
pub fn two_sample_z_test(a: &PrevalenceEstimate, b: &PrevalenceEstimate) -> Result<DeltaTest> {
    let (va, vb) = match (a.variance, b.variance) {
        (Some(va), Some(vb)) => (va, vb),
        _ => {
            return Err(Error::domain(
                "z-test requires variance on both estimates (n >= 2 each)",
            ))
        }
    };
    let delta = a.point - b.point;
    let var_sum = va + vb;
    if var_sum > 0.0 {
        let z = delta / var_sum.sqrt();
        Ok(DeltaTest {
            delta,
            z,
            p_value: normal_two_sided_p(z),
            degenerate: false,
        })
    } else if delta == 0.0 {
        Ok(DeltaTest {
            delta,
            z: 0.0,
            p_value: 1.0,
            degenerate: false,
        })
    } else {
        Ok(DeltaTest {
            delta,
            z: if delta > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            p_value: 0.0,
            degenerate: true,
        })
    }
}

/// Join a drawn sample with labels and segment impressions.
///
/// Every sampled item must have a label for `category`; items with no
/// impressions inside `segment` stay in the sample with `I_t(S) = 0`.
pub fn attach_labels(
    sample: &DrawnSample,
    labels: &dyn LabelSource,
    category: &str,
    records: &[ImpressionRecord],
    segment: &Segment,
) -> Result<Vec<LabeledSampleItem>> {
    let mut segment_impressions: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| segment.matches(r)) {
        *segment_impressions.entry(r.item.as_str()).or_insert(0) += r.impressions;
    }
    sample
        .items
        .iter()
        .map(|it| {
            let label = labels.label(&it.item, category).ok_or_else(|| {
                Error::domain(format!(
                    "sampled item {} has no label for category {category}",
                    it.item
                ))
            })?;
            Ok(LabeledSampleItem {
                item: it.item.clone(),
                label,
                segment_impressions: segment_impressions.get(it.item.as_str()).copied().unwrap_or(0),
                sampling_probability: it.sampling_probability,
            })
        })
        .collect()
}
