//! Log-only prevalence estimation: combine a segment's bucket impression
//! shares with calibrated bucket prevalences via the law of total
//! probability, propagating per-bucket variances.

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationTable;
use crate::datamodel::aggregate::bucket_impressions;
use crate::datamodel::{Bucketization, ImpressionRecord, ScoreTable, Segment};
use crate::error::{Error, Result};
use crate::hansen_hurwitz::{two_sample_z_test, DeltaTest, EstimateMethod, PrevalenceEstimate};

/// Per-bucket impression shares of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketShares {
    pub category: String,
    /// Human-readable segment label (reporting only).
    pub segment: String,
    pub buckets: Bucketization,
    /// `shares[b-1]` is the share of segment impressions in bucket `b`.
    pub shares: Vec<f64>,
    pub total_impressions: u64,
    /// Items without a score (counted into the lowest bucket).
    pub unscored_items: usize,
}

/// Share of segment impressions landing in each score bucket.
pub fn impression_shares(
    records: &[ImpressionRecord],
    scores: &ScoreTable,
    segment: &Segment,
    buckets: &Bucketization,
    category: &str,
) -> Result<BucketShares> {
    let tally = bucket_impressions(records, scores, category, buckets, segment)?;
    if tally.total == 0 {
        return Err(Error::domain(format!(
            "segment {} selects no impressions",
            segment.label()
        )));
    }
    let shares = tally
        .per_bucket
        .iter()
        .map(|&n| n as f64 / tally.total as f64)
        .collect();
    Ok(BucketShares {
        category: category.to_string(),
        segment: segment.label(),
        buckets: buckets.clone(),
        shares,
        total_impressions: tally.total,
        unscored_items: tally.unscored_items,
    })
}

fn check_compatible(shares: &BucketShares, table: &CalibrationTable) -> Result<()> {
    if shares.category != table.category {
        return Err(Error::domain(format!(
            "shares are for category {} but the calibration table is for {}",
            shares.category, table.category
        )));
    }
    if shares.buckets != table.buckets {
        return Err(Error::domain(
            "shares and calibration table use different bucketizations",
        ));
    }
    Ok(())
}

/// Variance of the surrogate estimate: `sum_b c_b^2 * Var(P_b)`.
///
/// Shares are treated as exact (they come from full logs) and buckets as
/// independent. Returns `None` when a contributing bucket lacks a variance.
pub fn surrogate_variance(shares: &BucketShares, table: &CalibrationTable) -> Result<Option<f64>> {
    check_compatible(shares, table)?;
    let mut total = 0.0;
    for (idx, &share) in shares.shares.iter().enumerate() {
        if share == 0.0 {
            continue;
        }
        let entry = table.entry(idx + 1);
        if entry.empty {
            return Err(Error::domain(format!(
                "segment {} has impressions in bucket {} but the calibration table marks it empty",
                shares.segment,
                idx + 1
            )));
        }
        match entry.variance {
            Some(v) => total += share * share * v,
            None => return Ok(None),
        }
    }
    Ok(Some(total))
}

/// Surrogate prevalence: `sum_b c_b * P_b` with propagated variance.
pub fn surrogate_prevalence(
    shares: &BucketShares,
    table: &CalibrationTable,
) -> Result<PrevalenceEstimate> {
    check_compatible(shares, table)?;
    let mut point = 0.0;
    for (idx, &share) in shares.shares.iter().enumerate() {
        if share == 0.0 {
            continue;
        }
        let entry = table.entry(idx + 1);
        let prevalence = entry.prevalence.ok_or_else(|| {
            Error::domain(format!(
                "segment {} has impressions in bucket {} but the calibration table marks it empty",
                shares.segment,
                idx + 1
            ))
        })?;
        point += share * prevalence;
    }
    let variance = surrogate_variance(shares, table)?;
    let mut est = PrevalenceEstimate::from_raw(
        EstimateMethod::Surrogate,
        point,
        variance,
        table.sample_size,
    );
    est.calibration_version = Some(table.version.clone());
    Ok(est)
}

/// Arm-level difference `treatment - control` with z-score and p-value.
pub fn arm_delta(
    treatment: &PrevalenceEstimate,
    control: &PrevalenceEstimate,
) -> Result<DeltaTest> {
    two_sample_z_test(treatment, control)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{calibrate, CalibrateParams};
    use crate::datamodel::records::ScoreRecord;
    use crate::datamodel::LabelTable;
    use crate::sampling::SampleWeightScheme;
    use approx::assert_abs_diff_eq;

    fn rec(user: &str, item: &str, arm: &str, n: u64) -> ImpressionRecord {
        ImpressionRecord {
            day: "2025-06-01".parse().unwrap(),
            user: user.into(),
            item: item.into(),
            arm: arm.into(),
            impressions: n,
        }
    }

    fn score(item: &str, s: f64) -> ScoreRecord {
        ScoreRecord {
            item: item.into(),
            category: "k".into(),
            score: s,
        }
    }

    #[test]
    fn shares_one_hot_when_all_scores_low() {
        let records = vec![rec("u1", "a", "x", 10), rec("u2", "b", "x", 30)];
        let mut scores = ScoreTable::new();
        scores.insert(score("a", 0.05)).unwrap();
        scores.insert(score("b", 0.05)).unwrap();
        let buckets = Bucketization::equal_width(10).unwrap();
        let shares =
            impression_shares(&records, &scores, &Segment::all(), &buckets, "k").unwrap();
        assert_eq!(shares.shares[0], 1.0);
        assert!(shares.shares[1..].iter().all(|&s| s == 0.0));
        assert_eq!(shares.total_impressions, 40);
    }

    #[test]
    fn shares_two_bucket_split() {
        let records = vec![rec("u1", "lo", "x", 75), rec("u2", "hi", "x", 25)];
        let mut scores = ScoreTable::new();
        scores.insert(score("lo", 0.05)).unwrap();
        scores.insert(score("hi", 0.95)).unwrap();
        let buckets = Bucketization::equal_width(10).unwrap();
        let shares =
            impression_shares(&records, &scores, &Segment::all(), &buckets, "k").unwrap();
        assert_abs_diff_eq!(shares.shares[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(shares.shares[9], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(shares.shares.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn shares_reject_empty_segment() {
        let records = vec![rec("u1", "a", "control", 10)];
        let scores = ScoreTable::new();
        let buckets = Bucketization::equal_width(2).unwrap();
        let err = impression_shares(
            &records,
            &scores,
            &Segment::arm("treatment"),
            &buckets,
            "k",
        );
        assert!(err.is_err());
    }

    /// A calibration table over `B` buckets with hand-set prevalences.
    fn hand_table(prevalences: &[Option<f64>], variances: &[Option<f64>]) -> CalibrationTable {
        let b = prevalences.len();
        let records: Vec<ImpressionRecord> = (0..b)
            .map(|i| rec(&format!("u{i}"), &format!("i{i}"), "x", 10))
            .collect();
        let mut scores = ScoreTable::new();
        let mut labels = LabelTable::new();
        for i in 0..b {
            // Center of bucket i+1.
            let s = (i as f64 + 0.5) / b as f64;
            scores.insert(score(&format!("i{i}"), s)).unwrap();
            labels.insert(&format!("i{i}"), "k", false).unwrap();
        }
        let buckets = Bucketization::equal_width(b).unwrap();
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsOnly, b, 1);
        let mut outcome = calibrate(&records, &scores, &labels, &buckets, &params).unwrap();
        for (i, e) in outcome.table.entries.iter_mut().enumerate() {
            e.prevalence = prevalences[i];
            e.raw_prevalence = prevalences[i];
            e.variance = variances[i];
            e.empty = prevalences[i].is_none();
        }
        outcome.table.version = outcome.table.compute_version();
        outcome.table
    }

    fn hand_shares(table: &CalibrationTable, shares: Vec<f64>) -> BucketShares {
        BucketShares {
            category: "k".into(),
            segment: "test".into(),
            buckets: table.buckets.clone(),
            shares,
            total_impressions: 1000,
            unscored_items: 0,
        }
    }

    #[test]
    fn surrogate_point_one_hot_returns_bucket_prevalence() {
        let table = hand_table(&[Some(0.01), Some(0.5)], &[Some(0.0), Some(0.0)]);
        let shares = hand_shares(&table, vec![0.0, 1.0]);
        let est = surrogate_prevalence(&shares, &table).unwrap();
        assert_abs_diff_eq!(est.point, 0.5, epsilon = 1e-12);
        assert_eq!(est.method, EstimateMethod::Surrogate);
        assert_eq!(est.calibration_version.as_deref(), Some(table.version.as_str()));
    }

    #[test]
    fn surrogate_point_weighted_mix() {
        let table = hand_table(&[Some(0.01), Some(0.5)], &[Some(0.0), Some(0.0)]);
        let shares = hand_shares(&table, vec![0.9, 0.1]);
        let est = surrogate_prevalence(&shares, &table).unwrap();
        assert_abs_diff_eq!(est.point, 0.059, epsilon = 1e-12);
    }

    #[test]
    fn surrogate_variance_arithmetic() {
        let table = hand_table(&[Some(0.1), Some(0.2)], &[Some(0.04), Some(0.04)]);
        let shares = hand_shares(&table, vec![0.5, 0.5]);
        assert_abs_diff_eq!(
            surrogate_variance(&shares, &table).unwrap().unwrap(),
            0.02,
            epsilon = 1e-12
        );
        // One-hot: variance equals the bucket's variance.
        let one_hot = hand_shares(&table, vec![1.0, 0.0]);
        assert_abs_diff_eq!(
            surrogate_variance(&one_hot, &table).unwrap().unwrap(),
            0.04,
            epsilon = 1e-12
        );
    }

    #[test]
    fn spreading_shares_never_raises_variance() {
        let v = 0.04;
        let table = hand_table(
            &[Some(0.1), Some(0.2), Some(0.3), Some(0.4)],
            &[Some(v); 4],
        );
        for shares in [
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.4, 0.3, 0.2, 0.1],
            vec![1.0, 0.0, 0.0, 0.0],
        ] {
            let s = hand_shares(&table, shares);
            let var = surrogate_variance(&s, &table).unwrap().unwrap();
            assert!(var <= v + 1e-15, "var {var} exceeds bucket variance {v}");
        }
    }

    #[test]
    fn positive_share_on_empty_bucket_fails_loudly() {
        let table = hand_table(&[Some(0.1), None], &[Some(0.0), None]);
        let shares = hand_shares(&table, vec![0.9, 0.1]);
        let err = surrogate_prevalence(&shares, &table).unwrap_err();
        assert!(err.to_string().contains("bucket 2"), "{err}");
        // Zero share on the empty bucket is fine.
        let ok = hand_shares(&table, vec![1.0, 0.0]);
        assert!(surrogate_prevalence(&ok, &table).is_ok());
    }

    #[test]
    fn mismatched_table_rejected() {
        let table = hand_table(&[Some(0.1), Some(0.2)], &[Some(0.0), Some(0.0)]);
        let mut shares = hand_shares(&table, vec![0.5, 0.5]);
        shares.category = "other".into();
        assert!(surrogate_prevalence(&shares, &table).is_err());

        let mut shares = hand_shares(&table, vec![0.5, 0.5]);
        shares.buckets = Bucketization::equal_width(3).unwrap();
        shares.shares = vec![0.5, 0.25, 0.25];
        assert!(surrogate_prevalence(&shares, &table).is_err());
    }

    #[test]
    fn constant_prevalence_is_reproduced_for_any_shares() {
        let p = 0.037;
        let table = hand_table(&[Some(p); 5], &[Some(0.0); 5]);
        for shares in [
            vec![0.2, 0.2, 0.2, 0.2, 0.2],
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.05, 0.15, 0.30, 0.45, 0.05],
        ] {
            let s = hand_shares(&table, shares);
            let est = surrogate_prevalence(&s, &table).unwrap();
            assert_abs_diff_eq!(est.point, p, epsilon = 1e-12);
        }
    }

    #[test]
    fn moving_mass_upward_never_decreases_point() {
        let table = hand_table(
            &[Some(0.01), Some(0.05), Some(0.2), Some(0.6)],
            &[Some(0.0); 4],
        );
        let base = hand_shares(&table, vec![0.4, 0.3, 0.2, 0.1]);
        let base_point = surrogate_prevalence(&base, &table).unwrap().point;
        // Move 0.05 of mass from bucket 2 to bucket 4.
        let shifted = hand_shares(&table, vec![0.4, 0.25, 0.2, 0.15]);
        let shifted_point = surrogate_prevalence(&shifted, &table).unwrap().point;
        assert!(shifted_point >= base_point);
    }

    #[test]
    fn point_bounded_by_contributing_prevalences() {
        let table = hand_table(
            &[Some(0.02), Some(0.08), Some(0.5)],
            &[Some(0.0); 3],
        );
        let shares = hand_shares(&table, vec![0.6, 0.4, 0.0]);
        let est = surrogate_prevalence(&shares, &table).unwrap();
        assert!(est.point >= 0.02 && est.point <= 0.08);
    }

    #[test]
    fn arm_delta_same_shares_is_null() {
        let table = hand_table(&[Some(0.1), Some(0.3)], &[Some(1e-6), Some(1e-6)]);
        let shares = hand_shares(&table, vec![0.7, 0.3]);
        let est = surrogate_prevalence(&shares, &table).unwrap();
        let t = arm_delta(&est, &est).unwrap();
        assert_eq!(t.delta, 0.0);
        assert_eq!(t.p_value, 1.0);
    }
}
