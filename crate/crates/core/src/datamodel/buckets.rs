//! Score bucketization: equal-width, quantile-based, and explicit boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// How a bucketization's boundaries were derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketScheme {
    EqualWidth,
    Quantile,
    Explicit,
}

/// A partition of [0,1] into score buckets.
///
/// Boundaries are strictly increasing with `u_0 = 0` and `u_B = 1`. Buckets
/// `1..B-1` are half-open `[u_{j-1}, u_j)`; the last bucket is closed so that
/// a score of exactly 1 is representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucketization {
    boundaries: Vec<f64>,
    scheme: BucketScheme,
}

impl Bucketization {
    /// `B` equal-width buckets with boundaries `j/B`.
    pub fn equal_width(b: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::domain("bucket count must be positive"));
        }
        let boundaries = (0..=b).map(|j| j as f64 / b as f64).collect();
        Ok(Bucketization {
            boundaries,
            scheme: BucketScheme::EqualWidth,
        })
    }

    /// Buckets bounded by the `j/B` empirical quantiles of `scores`.
    ///
    /// Duplicate boundaries are deduplicated and buckets left empty of input
    /// scores are collapsed into a neighbor, so the result has at most `B`
    /// buckets and every surviving bucket contains at least one input score.
    pub fn from_quantiles(scores: &[f64], b: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::domain("bucket count must be positive"));
        }
        if scores.is_empty() {
            return Err(Error::domain("quantile bucketization needs a non-empty score set"));
        }
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::domain("scores for quantile bucketization must lie in [0,1]"));
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("range-checked above"));

        let mut boundaries = vec![0.0];
        for j in 1..b {
            let q = quantile_sorted(&sorted, j as f64 / b as f64);
            // Force interior boundaries strictly inside (0,1); endpoint
            // duplicates add nothing.
            if q > *boundaries.last().expect("non-empty") && q < 1.0 {
                boundaries.push(q);
            }
        }
        boundaries.push(1.0);

        // Collapse buckets that contain no input score: drop the offending
        // bucket's right boundary (or its left one when it is the last
        // bucket), never the forced endpoints.
        loop {
            let candidate = Bucketization {
                boundaries: boundaries.clone(),
                scheme: BucketScheme::Quantile,
            };
            if boundaries.len() == 2 {
                return Ok(candidate);
            }
            let mut counts = vec![0usize; candidate.len()];
            for &s in &sorted {
                counts[candidate.bucket_of(s).expect("scores validated") - 1] += 1;
            }
            match counts.iter().position(|&c| c == 0) {
                None => return Ok(candidate),
                Some(idx) if idx + 1 == counts.len() => {
                    boundaries.remove(idx); // left boundary of the last bucket
                }
                Some(idx) => {
                    boundaries.remove(idx + 1); // right boundary
                }
            }
        }
    }

    /// Bucketization from explicit boundaries (validated).
    pub fn explicit(boundaries: Vec<f64>) -> Result<Self> {
        Self::from_parts(boundaries, BucketScheme::Explicit)
    }

    /// Validate and assemble from parts (used by file ingestion).
    pub fn from_parts(boundaries: Vec<f64>, scheme: BucketScheme) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::domain("bucketization needs at least 2 boundaries"));
        }
        if boundaries[0] != 0.0 || *boundaries.last().expect("len >= 2") != 1.0 {
            return Err(Error::domain("bucket boundaries must start at 0 and end at 1"));
        }
        if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("bucket boundaries must be strictly increasing"));
        }
        Ok(Bucketization { boundaries, scheme })
    }

    /// Number of buckets `B`.
    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false // a valid bucketization always has at least one bucket
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn scheme(&self) -> BucketScheme {
        self.scheme
    }

    /// 1-based index of the bucket containing `score`.
    pub fn bucket_of(&self, score: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::domain(format!("score {score} outside [0,1]")));
        }
        let inner = &self.boundaries[1..self.boundaries.len() - 1];
        Ok(inner.partition_point(|&u| u <= score) + 1)
    }

    /// Half-open (closed for the last bucket) interval of bucket `j` (1-based).
    pub fn interval(&self, bucket: usize) -> (f64, f64) {
        assert!(bucket >= 1 && bucket <= self.len(), "bucket index out of range");
        (self.boundaries[bucket - 1], self.boundaries[bucket])
    }
}
