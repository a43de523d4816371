//! Impression aggregations over log records, shared by calibration
//! (marginal bucket probabilities) and the surrogate estimator (shares).

use std::collections::BTreeMap;

use super::buckets::Bucketization;
use super::records::{Day, ImpressionRecord, ScoreTable};
use super::segment::Segment;
use crate::error::Result;

/// Total impressions inside a segment.
pub fn total_impressions(records: &[ImpressionRecord], segment: &Segment) -> u64 {
    records
        .iter()
        .filter(|r| segment.matches(r))
        .map(|r| r.impressions)
        .sum()
}

/// Per-item impressions inside a segment, sorted by item.
pub fn item_impressions<'a>(
    records: &'a [ImpressionRecord],
    segment: &Segment,
) -> BTreeMap<&'a str, u64> {
    let mut out: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| segment.matches(r)) {
        *out.entry(r.item.as_str()).or_insert(0) += r.impressions;
    }
    out
}

/// Inclusive day range covered by the records, if any.
pub fn day_range(records: &[ImpressionRecord]) -> Option<(Day, Day)> {
    let min = records.iter().map(|r| r.day).min()?;
    let max = records.iter().map(|r| r.day).max()?;
    Some((min, max))
}

/// Distinct days present in the records, sorted.
pub fn distinct_days(records: &[ImpressionRecord]) -> Vec<Day> {
    let mut days: Vec<Day> = records.iter().map(|r| r.day).collect();
    days.sort();
    days.dedup();
    days
}

/// Impressions split by score bucket within a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketImpressions {
    /// Impressions per bucket, index 0 holding bucket 1.
    pub per_bucket: Vec<u64>,
    /// Total impressions in the segment (= sum of `per_bucket`).
    pub total: u64,
    /// Distinct items lacking a score for the category (scored as 0,
    /// entering the lowest bucket).
    pub unscored_items: usize,
    /// Impressions contributed by those unscored items.
    pub unscored_impressions: u64,
}

/// Tally segment impressions into the buckets of each item's score.
///
/// Items with no score for `category` count as score 0 and land in the
/// lowest bucket; callers surface `unscored_items` as a warning.
pub fn bucket_impressions(
    records: &[ImpressionRecord],
    scores: &ScoreTable,
    category: &str,
    buckets: &Bucketization,
    segment: &Segment,
) -> Result<BucketImpressions> {
    let per_item = item_impressions(records, segment);
    let mut out = BucketImpressions {
        per_bucket: vec![0; buckets.len()],
        total: 0,
        unscored_items: 0,
        unscored_impressions: 0,
    };
    for (item, imps) in per_item {
        let score = match scores.score(category, item) {
            Some(s) => s,
            None => {
                out.unscored_items += 1;
                out.unscored_impressions += imps;
                0.0
            }
        };
        let bucket = buckets.bucket_of(score)?;
        out.per_bucket[bucket - 1] += imps;
        out.total += imps;
    }
    Ok(out)
}
