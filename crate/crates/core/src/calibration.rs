//! Bucket-level prevalence calibration from one global labeled sample.
//!
//! Calibration decomposes each bucket's prevalence into a joint probability
//! (an impression is both in the target category and in the bucket,
//! estimated from the labeled sample) and a marginal probability (an
//! impression is in the bucket, computed exactly from the logs); their
//! ratio is the conditional prevalence of the bucket. One global PPSWOR
//! sample is drawn and reused for every bucket rather than sampling per
//! bucket, so skinny buckets are flagged `low-confidence` instead of
//! triggering extra labeling.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::aggregate::{bucket_impressions, day_range, item_impressions};
use crate::datamodel::ingest::write_ndjson;
use crate::datamodel::{Bucketization, Day, ImpressionRecord, LabelSource, ScoreTable, Segment};
use crate::error::{Error, Result};
use crate::hansen_hurwitz::{hh_prevalence, LabeledSampleItem};
use crate::sampling::{draw_sample, DrawnSample, SampleDiagnostics, SampleWeightScheme};
use crate::stats::{logit, sigmoid};

/// Default minimum labeled items per bucket before flagging `low-confidence`.
pub const DEFAULT_LOW_CONFIDENCE_FLOOR: usize = 30;

/// Clamp applied to prevalences before the logit transform.
pub const LOGIT_EPSILON: f64 = 1e-6;

/// One sampled item annotated with its score bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketedSampleItem {
    pub item: String,
    pub label: bool,
    /// Item impressions over the full calibration window.
    pub impressions: u64,
    pub sampling_probability: f64,
    /// 1-based bucket of the item's score.
    pub bucket: usize,
}

/// Calibration result for a single bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketCalibration {
    /// 1-based bucket index.
    pub bucket: usize,
    /// Estimated prevalence, clamped to [0,1]; `None` for empty buckets.
    pub prevalence: Option<f64>,
    /// Unclamped estimate, kept for diagnostics.
    pub raw_prevalence: Option<f64>,
    /// Variance of the bucket prevalence estimate.
    pub variance: Option<f64>,
    /// Sampled (and therefore labeled) items whose score fell in the bucket.
    pub labeled_count: usize,
    /// Marginal probability that a random impression lands in the bucket.
    pub marginal: f64,
    /// Set when `labeled_count` is below the configured floor.
    pub low_confidence: bool,
    /// Set when the bucket received no impressions at all.
    pub empty: bool,
}

/// Inclusive day window the calibration was computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationWindow {
    pub from: Day,
    pub to: Day,
}

/// The reusable offline artifact: per-bucket prevalences with metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub category: String,
    pub buckets: Bucketization,
    pub scheme: SampleWeightScheme,
    pub seed: u64,
    pub sample_size: usize,
    pub low_confidence_floor: usize,
    pub window: CalibrationWindow,
    /// Content hash identifying this table snapshot.
    pub version: String,
    pub entries: Vec<BucketCalibration>,
}

impl CalibrationTable {
    /// Entry for a 1-based bucket index.
    pub fn entry(&self, bucket: usize) -> &BucketCalibration {
        &self.entries[bucket - 1]
    }

    /// Recompute the content hash over everything except the hash itself.
    pub fn compute_version(&self) -> String {
        #[derive(Serialize)]
        struct Versioned<'a> {
            category: &'a str,
            boundaries: &'a [f64],
            bucket_scheme: crate::datamodel::BucketScheme,
            scheme: SampleWeightScheme,
            seed: u64,
            sample_size: usize,
            low_confidence_floor: usize,
            window: &'a CalibrationWindow,
            entries: &'a [BucketCalibration],
        }
        let canonical = serde_json::to_string(&Versioned {
            category: &self.category,
            boundaries: self.buckets.boundaries(),
            bucket_scheme: self.buckets.scheme(),
            scheme: self.scheme,
            seed: self.seed,
            sample_size: self.sample_size,
            low_confidence_floor: self.low_confidence_floor,
            window: &self.window,
            entries: &self.entries,
        })
        .expect("calibration table serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Parameters for [`calibrate`].
#[derive(Debug, Clone)]
pub struct CalibrateParams {
    pub category: String,
    pub scheme: SampleWeightScheme,
    pub sample_size: usize,
    pub seed: u64,
    pub low_confidence_floor: usize,
}

impl CalibrateParams {
    pub fn new(category: impl Into<String>, scheme: SampleWeightScheme, sample_size: usize, seed: u64) -> Self {
        CalibrateParams {
            category: category.into(),
            scheme,
            sample_size,
            seed,
            low_confidence_floor: DEFAULT_LOW_CONFIDENCE_FLOOR,
        }
    }
}

/// Everything produced by a calibration run.
#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub table: CalibrationTable,
    pub sample: DrawnSample,
    pub labeled: Vec<BucketedSampleItem>,
    pub diagnostics: SampleDiagnostics,
}

/// Estimated joint probability that an impression is in the target category
/// AND in `bucket`: `(1/n) * sum_t Z_t * 1{t in b} * I_t / p_t`, normalized
/// by the total population impressions.
pub fn joint_probability(
    sample: &[BucketedSampleItem],
    bucket: usize,
    total_population_impressions: u64,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::domain("joint probability needs a non-empty sample"));
    }
    if total_population_impressions == 0 {
        return Err(Error::domain(
            "joint probability is undefined with zero population impressions",
        ));
    }
    let mut sum = 0.0;
    for it in sample {
        if !(it.sampling_probability > 0.0) {
            return Err(Error::domain(format!(
                "item {} has non-positive sampling probability",
                it.item
            )));
        }
        if it.label && it.bucket == bucket {
            sum += it.impressions as f64 / it.sampling_probability;
        }
    }
    Ok(sum / sample.len() as f64 / total_population_impressions as f64)
}

/// Exact marginal probability that a random impression falls in `bucket`.
pub fn marginal_bucket_probability(
    records: &[ImpressionRecord],
    scores: &ScoreTable,
    category: &str,
    buckets: &Bucketization,
    bucket: usize,
) -> Result<f64> {
    let tally = bucket_impressions(records, scores, category, buckets, &Segment::all())?;
    if tally.total == 0 {
        return Err(Error::domain(
            "marginal bucket probability is undefined with zero impressions",
        ));
    }
    Ok(tally.per_bucket[bucket - 1] as f64 / tally.total as f64)
}

/// Conditional bucket prevalence `joint / marginal`, clamped to [0,1].
///
/// Returns `(clamped, raw)`; a zero marginal means the bucket is empty and
/// carries no prevalence.
pub fn bucket_prevalence(joint: f64, marginal: f64) -> Result<(f64, f64)> {
    if !(marginal > 0.0) {
        return Err(Error::domain(
            "bucket prevalence is undefined for an empty bucket (marginal = 0)",
        ));
    }
    let raw = joint / marginal;
    Ok((raw.clamp(0.0, 1.0), raw))
}

/// Build a [`CalibrationTable`] from calibration-window logs.
///
/// Draws one global PPSWOR sample over all records (the caller restricts
/// the window by what it passes in), labels it via `labels`, and estimates
/// every bucket from that single sample.
pub fn calibrate(
    records: &[ImpressionRecord],
    scores: &ScoreTable,
    labels: &dyn LabelSource,
    buckets: &Bucketization,
    params: &CalibrateParams,
) -> Result<CalibrationOutcome> {
    let (from, to) = day_range(records)
        .ok_or_else(|| Error::domain("calibration needs at least one impression record"))?;
    let segment = Segment::all();
    let (sample, diagnostics) = draw_sample(
        records,
        scores,
        &params.category,
        &segment,
        params.scheme,
        params.sample_size,
        params.seed,
    )?;
    if sample.is_empty() {
        return Err(Error::domain(
            "calibration sample is empty; no item had positive sampling weight",
        ));
    }

    // Annotate sampled items with labels, window impressions, and buckets.
    let window_impressions = item_impressions(records, &segment);
    let labeled: Vec<BucketedSampleItem> = sample
        .items
        .iter()
        .map(|it| {
            let label = labels.label(&it.item, &params.category).ok_or_else(|| {
                Error::domain(format!(
                    "sampled item {} has no label for category {}",
                    it.item, params.category
                ))
            })?;
            let score = scores.score(&params.category, &it.item).unwrap_or(0.0);
            Ok(BucketedSampleItem {
                item: it.item.clone(),
                label,
                impressions: window_impressions.get(it.item.as_str()).copied().unwrap_or(0),
                sampling_probability: it.sampling_probability,
                bucket: buckets.bucket_of(score)?,
            })
        })
        .collect::<Result<_>>()?;

    let tally = bucket_impressions(records, scores, &params.category, buckets, &segment)?;
    let entries = (1..=buckets.len())
        .map(|b| calibrate_bucket(&labeled, &tally.per_bucket, tally.total, b, params))
        .collect::<Result<Vec<_>>>()?;

    let mut table = CalibrationTable {
        category: params.category.clone(),
        buckets: buckets.clone(),
        scheme: params.scheme,
        seed: params.seed,
        sample_size: params.sample_size,
        low_confidence_floor: params.low_confidence_floor,
        window: CalibrationWindow { from, to },
        version: String::new(),
        entries,
    };
    table.version = table.compute_version();
    Ok(CalibrationOutcome {
        table,
        sample,
        labeled,
        diagnostics,
    })
}

fn calibrate_bucket(
    labeled: &[BucketedSampleItem],
    bucket_imps: &[u64],
    total_imps: u64,
    bucket: usize,
    params: &CalibrateParams,
) -> Result<BucketCalibration> {
    let marginal = bucket_imps[bucket - 1] as f64 / total_imps as f64;
    let labeled_count = labeled.iter().filter(|it| it.bucket == bucket).count();
    if bucket_imps[bucket - 1] == 0 {
        return Ok(BucketCalibration {
            bucket,
            prevalence: None,
            raw_prevalence: None,
            variance: None,
            labeled_count,
            marginal,
            low_confidence: labeled_count < params.low_confidence_floor,
            empty: true,
        });
    }
    // Hansen-Hurwitz machinery restricted to segment S = bucket: items
    // outside the bucket stay in the sample with zero segment impressions.
    let hh_sample: Vec<LabeledSampleItem> = labeled
        .iter()
        .map(|it| LabeledSampleItem {
            item: it.item.clone(),
            label: it.label,
            segment_impressions: if it.bucket == bucket { it.impressions } else { 0 },
            sampling_probability: it.sampling_probability,
        })
        .collect();
    let est = hh_prevalence(&hh_sample, bucket_imps[bucket - 1])?;
    Ok(BucketCalibration {
        bucket,
        prevalence: Some(est.point),
        raw_prevalence: Some(est.raw_point),
        variance: est.variance,
        labeled_count,
        marginal,
        low_confidence: labeled_count < params.low_confidence_floor,
        empty: false,
    })
}

/// Logit-scale parameters per bucket for the simulation estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitBucket {
    pub mu: f64,
    pub sigma: f64,
}

/// Per-bucket logit parameters; `None` entries are empty buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitParams {
    pub per_bucket: Vec<Option<LogitBucket>>,
}

/// Delta-method logit parameters for every non-empty bucket.
///
/// Prevalences are clamped into `(1e-6, 1-1e-6)` first; `mu = logit(P)` and
/// `sigma = sqrt(Var) / (P (1-P))`.
pub fn logit_params(table: &CalibrationTable) -> LogitParams {
    let per_bucket = table
        .entries
        .iter()
        .map(|e| {
            let p = e.prevalence?;
            let p = p.clamp(LOGIT_EPSILON, 1.0 - LOGIT_EPSILON);
            let var = e.variance.unwrap_or(0.0).max(0.0);
            Some(LogitBucket {
                mu: logit(p),
                sigma: var.sqrt() / (p * (1.0 - p)),
            })
        })
        .collect();
    LogitParams { per_bucket }
}

/// Inverse of the logit transform, exposed for round-trip checks.
pub fn inverse_logit(mu: f64) -> f64 {
    sigmoid(mu)
}

#[derive(Serialize, Deserialize)]
struct TableHeader {
    category: String,
    boundaries: Vec<f64>,
    bucket_scheme: crate::datamodel::BucketScheme,
    scheme: SampleWeightScheme,
    seed: u64,
    sample_size: usize,
    low_confidence_floor: usize,
    window: CalibrationWindow,
    version: String,
}

/// Persist a calibration table: a header line plus one line per bucket.
pub fn write_calibration(path: impl AsRef<Path>, table: &CalibrationTable) -> Result<()> {
    let header = serde_json::to_value(TableHeader {
        category: table.category.clone(),
        boundaries: table.buckets.boundaries().to_vec(),
        bucket_scheme: table.buckets.scheme(),
        scheme: table.scheme,
        seed: table.seed,
        sample_size: table.sample_size,
        low_confidence_floor: table.low_confidence_floor,
        window: table.window,
        version: table.version.clone(),
    })
    .expect("header serializes");
    let rows = std::iter::once(header).chain(
        table
            .entries
            .iter()
            .map(|e| serde_json::to_value(e).expect("bucket row serializes")),
    );
    write_ndjson(path, rows)
}

/// Load a calibration table, verifying its version hash.
pub fn read_calibration(path: impl AsRef<Path>) -> Result<CalibrationTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut header: Option<TableHeader> = None;
    let mut entries: Vec<BucketCalibration> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(|e| {
                Error::parse(path.display().to_string(), lineno, format!("table header: {e}"))
            })?);
        } else {
            entries.push(serde_json::from_str(&line).map_err(|e| {
                Error::parse(path.display().to_string(), lineno, e.to_string())
            })?);
        }
    }
    let header = header
        .ok_or_else(|| Error::parse(path.display().to_string(), 1, "missing table header"))?;
    let buckets = Bucketization::from_parts(header.boundaries, header.bucket_scheme)?;
    if entries.len() != buckets.len() {
        return Err(Error::domain(format!(
            "calibration table has {} bucket rows for {} buckets",
            entries.len(),
            buckets.len()
        )));
    }
    let table = CalibrationTable {
        category: header.category,
        buckets,
        scheme: header.scheme,
        seed: header.seed,
        sample_size: header.sample_size,
        low_confidence_floor: header.low_confidence_floor,
        window: header.window,
        version: header.version,
        entries,
    };
    let expected = table.compute_version();
    if table.version != expected {
        return Err(Error::domain(format!(
            "calibration table version {} does not match its contents (expected {}); \
             the file was edited or corrupted",
            table.version, expected
        )));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::records::ScoreRecord;
    use crate::datamodel::LabelTable;
    use approx::assert_abs_diff_eq;

    fn bucketed(label: bool, imps: u64, p: f64, bucket: usize) -> BucketedSampleItem {
        BucketedSampleItem {
            item: format!("i-{label}-{imps}-{p}-{bucket}"),
            label,
            impressions: imps,
            sampling_probability: p,
            bucket,
        }
    }

    #[test]
    fn joint_probability_arithmetic() {
        // One sampled item: Z=1, 50 impressions all in bucket 3, p=0.5,
        // population total 1,000 -> (50/0.5)/1000 = 0.1.
        let sample = vec![bucketed(true, 50, 0.5, 3)];
        assert_abs_diff_eq!(
            joint_probability(&sample, 3, 1000).unwrap(),
            0.1,
            epsilon = 1e-12
        );
        // No sampled item in bucket 5 -> 0.
        assert_eq!(joint_probability(&sample, 5, 1000).unwrap(), 0.0);
    }

    #[test]
    fn joint_probability_input_validation() {
        assert!(joint_probability(&[], 1, 100).is_err());
        let sample = vec![bucketed(true, 5, 0.5, 1)];
        assert!(joint_probability(&sample, 1, 0).is_err());
        let bad = vec![bucketed(true, 5, 0.0, 1)];
        assert!(joint_probability(&bad, 1, 100).is_err());
    }

    fn tiny_world() -> (Vec<ImpressionRecord>, ScoreTable) {
        let mut records = Vec::new();
        let mut scores = ScoreTable::new();
        // 10 items, scores i/10 + 0.05, impressions varying.
        for i in 0..10u64 {
            records.push(ImpressionRecord {
                day: "2025-06-01".parse().unwrap(),
                user: format!("u{i}"),
                item: format!("i{i}"),
                arm: "control".into(),
                impressions: 10 + i,
            });
            scores
                .insert(ScoreRecord {
                    item: format!("i{i}"),
                    category: "k".into(),
                    score: i as f64 / 10.0 + 0.05,
                })
                .unwrap();
        }
        (records, scores)
    }

    #[test]
    fn marginals_match_hand_counts_and_sum_to_one() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::equal_width(10).unwrap();
        let total: u64 = (0..10u64).map(|i| 10 + i).sum();
        let mut sum = 0.0;
        for b in 1..=10 {
            let m =
                marginal_bucket_probability(&records, &scores, "k", &buckets, b).unwrap();
            let expected = (10 + (b as u64 - 1)) as f64 / total as f64;
            assert_abs_diff_eq!(m, expected, epsilon = 1e-12);
            sum += m;
        }
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn marginal_one_hot_when_single_bucket_occupied() {
        let records = vec![ImpressionRecord {
            day: "2025-06-01".parse().unwrap(),
            user: "u".into(),
            item: "only".into(),
            arm: "a".into(),
            impressions: 7,
        }];
        let mut scores = ScoreTable::new();
        scores
            .insert(ScoreRecord {
                item: "only".into(),
                category: "k".into(),
                score: 0.35,
            })
            .unwrap();
        let buckets = Bucketization::equal_width(10).unwrap();
        for b in 1..=10 {
            let m =
                marginal_bucket_probability(&records, &scores, "k", &buckets, b).unwrap();
            assert_eq!(m, if b == 4 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn bucket_prevalence_ratio_and_clamping() {
        let (p, raw) = bucket_prevalence(0.06, 0.3).unwrap();
        assert_abs_diff_eq!(p, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(raw, 0.2, epsilon = 1e-12);

        let (p, raw) = bucket_prevalence(0.0, 0.3).unwrap();
        assert_eq!((p, raw), (0.0, 0.0));

        // Sampling noise can push the joint above the marginal.
        let (p, raw) = bucket_prevalence(0.35, 0.3).unwrap();
        assert_eq!(p, 1.0);
        assert_abs_diff_eq!(raw, 0.35 / 0.3, epsilon = 1e-12);

        assert!(bucket_prevalence(0.1, 0.0).is_err());
    }

    fn all_false_labels() -> LabelTable {
        let mut labels = LabelTable::new();
        for i in 0..10 {
            labels.insert(&format!("i{i}"), "k", false).unwrap();
        }
        labels
    }

    #[test]
    fn calibrate_all_negative_labels_gives_zero_prevalences() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::equal_width(5).unwrap();
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsOnly, 6, 11);
        let outcome =
            calibrate(&records, &scores, &all_false_labels(), &buckets, &params).unwrap();
        for e in &outcome.table.entries {
            assert!(!e.empty);
            assert_eq!(e.prevalence, Some(0.0));
        }
    }

    #[test]
    fn calibrate_is_deterministic_per_seed() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::equal_width(5).unwrap();
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsTimesScore, 6, 42);
        let labels = all_false_labels();
        let a = calibrate(&records, &scores, &labels, &buckets, &params).unwrap();
        let b = calibrate(&records, &scores, &labels, &buckets, &params).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.table.version, b.table.version);

        let mut other = params.clone();
        other.seed = 43;
        let c = calibrate(&records, &scores, &labels, &buckets, &other).unwrap();
        assert_ne!(a.table.version, c.table.version);
    }

    #[test]
    fn calibrate_flags_missing_labels() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::equal_width(5).unwrap();
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsOnly, 10, 1);
        let labels = LabelTable::new();
        assert!(calibrate(&records, &scores, &labels, &buckets, &params).is_err());
    }

    // Consistency with the direct per-segment estimator: joint/marginal for
    // bucket b equals hh_prevalence on segment S = b from the same sample.
    #[test]
    fn joint_marginal_ratio_matches_direct_hh() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::equal_width(5).unwrap();
        let mut labels = LabelTable::new();
        for i in 0..10 {
            labels.insert(&format!("i{i}"), "k", i % 2 == 0).unwrap();
        }
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsOnly, 7, 5);
        let outcome = calibrate(&records, &scores, &labels, &buckets, &params).unwrap();

        let tally = bucket_impressions(
            &records,
            &scores,
            "k",
            &buckets,
            &Segment::all(),
        )
        .unwrap();
        for b in 1..=buckets.len() {
            let entry = outcome.table.entry(b);
            if entry.empty {
                continue;
            }
            let joint = joint_probability(&outcome.labeled, b, tally.total).unwrap();
            let (via_ratio, _) = bucket_prevalence(joint, entry.marginal).unwrap();
            assert_abs_diff_eq!(
                via_ratio,
                entry.prevalence.unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn low_confidence_and_empty_flags() {
        let (records, scores) = tiny_world();
        // Only two buckets get impressions with this explicit bucketization:
        // everything except scores >= 0.95 lands in bucket 1.
        let buckets = Bucketization::explicit(vec![0.0, 0.95, 0.97, 1.0]).unwrap();
        let mut params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsOnly, 10, 3);
        params.low_confidence_floor = 3;
        let outcome =
            calibrate(&records, &scores, &all_false_labels(), &buckets, &params).unwrap();
        let last = outcome.table.entry(3);
        assert!(last.empty, "no score lies in [0.97, 1.0]");
        assert_eq!(last.prevalence, None);
        assert_eq!(last.marginal, 0.0);
        let middle = outcome.table.entry(2);
        assert!(!middle.empty, "score 0.95 lands in [0.95, 0.97)");
        assert!(middle.low_confidence, "single item in that bucket");
    }

    #[test]
    fn logit_params_arithmetic() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::equal_width(2).unwrap();
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsOnly, 10, 9);
        let mut outcome =
            calibrate(&records, &scores, &all_false_labels(), &buckets, &params).unwrap();
        // Overwrite with hand values to pin the arithmetic.
        outcome.table.entries[0].prevalence = Some(0.5);
        outcome.table.entries[0].variance = Some(0.01);
        outcome.table.entries[1].prevalence = Some(1.0 / (1.0 + std::f64::consts::E));
        outcome.table.entries[1].variance = Some(0.0);
        let lp = logit_params(&outcome.table);
        let b1 = lp.per_bucket[0].unwrap();
        assert_abs_diff_eq!(b1.mu, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b1.sigma, 0.4, epsilon = 1e-12);
        let b2 = lp.per_bucket[1].unwrap();
        assert_abs_diff_eq!(b2.mu, -1.0, epsilon = 1e-12);
        assert_eq!(b2.sigma, 0.0);
    }

    #[test]
    fn logit_roundtrip() {
        for &p in &[2e-6f64, 0.01, 0.3, 0.5, 0.99, 1.0 - 2e-6] {
            let mu = logit(p.clamp(LOGIT_EPSILON, 1.0 - LOGIT_EPSILON));
            assert_abs_diff_eq!(inverse_logit(mu), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn logit_params_skip_empty_buckets() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::explicit(vec![0.0, 0.95, 0.97, 1.0]).unwrap();
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsOnly, 10, 3);
        let outcome =
            calibrate(&records, &scores, &all_false_labels(), &buckets, &params).unwrap();
        let lp = logit_params(&outcome.table);
        assert!(lp.per_bucket[2].is_none());
        assert!(lp.per_bucket[0].is_some());
        assert!(lp.per_bucket[1].is_some());
    }

    #[test]
    fn table_file_roundtrip_and_tamper_detection() {
        let (records, scores) = tiny_world();
        let buckets = Bucketization::equal_width(4).unwrap();
        let mut labels = LabelTable::new();
        for i in 0..10 {
            labels.insert(&format!("i{i}"), "k", i >= 7).unwrap();
        }
        let params = CalibrateParams::new("k", SampleWeightScheme::ImpressionsTimesScore, 8, 21);
        let outcome = calibrate(&records, &scores, &labels, &buckets, &params).unwrap();

        let f = tempfile::NamedTempFile::new().unwrap();
        write_calibration(f.path(), &outcome.table).unwrap();
        let loaded = read_calibration(f.path()).unwrap();
        assert_eq!(loaded, outcome.table);

        // Flip one digit of a stored prevalence: version check must fail.
        let text = std::fs::read_to_string(f.path()).unwrap();
        let tampered = text.replacen("\"labeled_count\":", "\"labeled_count\":1", 1);
        assert_ne!(text, tampered);
        std::fs::write(f.path(), tampered).unwrap();
        assert!(read_calibration(f.path()).is_err());
    }
}
