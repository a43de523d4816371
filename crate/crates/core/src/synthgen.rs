//! Deterministic synthetic-world generation with exact ground truth.
//!
//! A world is a fully materialized population: items with true binary
//! labels, scores drawn from label-conditional Beta mixtures, and impression
//! logs produced by a heavy-tailed popularity model under per-arm exposure
//! filters. Because every log row is materialized, oracle prevalences are
//! exact integer ratios, giving every estimator an uncompromised target.

use std::collections::BTreeMap;

use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::datamodel::records::ScoreRecord;
use crate::datamodel::{
    Bucketization, Day, ImpressionRecord, LabelTable, ScoreTable, Segment,
};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, stream, KeyedRng};

/// Parameters of one Beta component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

/// Label-conditional score distributions.
///
/// Separation between the two components controls how informative scores
/// are: identical components make scores useless, disjoint ones make them
/// perfect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    /// Score distribution for items truly in the category.
    pub positive: BetaParams,
    /// Score distribution for items not in the category.
    pub negative: BetaParams,
}

/// One target category of the synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryConfig {
    pub name: String,
    /// Probability that an item truly belongs to the category.
    pub label_rate: f64,
    pub score_model: ScoreModel,
}

/// Exposure-time score-threshold filter: drop items with `m >= tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFilter {
    pub category: String,
    pub tau: f64,
}

/// One experiment arm; `filter: None` is the unfiltered (control) process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<ThresholdFilter>,
}

/// Full specification of a synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub items: usize,
    pub users: usize,
    pub days: usize,
    pub start_day: Day,
    pub seed: u64,
    /// Poisson mean of impressions per (user, day).
    pub mean_impressions_per_user_day: f64,
    /// Power-law exponent of item popularity (0 = uniform).
    pub popularity_exponent: f64,
    pub categories: Vec<CategoryConfig>,
    pub arms: Vec<ArmConfig>,
}

impl WorldConfig {
    fn validate(&self) -> Result<()> {
        if self.items == 0 || self.users == 0 || self.days == 0 {
            return Err(Error::domain("items, users, and days must all be at least 1"));
        }
        if !(self.mean_impressions_per_user_day > 0.0) {
            return Err(Error::domain("mean impressions per user-day must be positive"));
        }
        if !(self.popularity_exponent >= 0.0) {
            return Err(Error::domain("popularity exponent must be non-negative"));
        }
        if self.categories.is_empty() {
            return Err(Error::domain("at least one category is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.categories {
            if !seen.insert(&c.name) {
                return Err(Error::domain(format!("duplicate category {:?}", c.name)));
            }
            if !(0.0..=1.0).contains(&c.label_rate) {
                return Err(Error::domain(format!(
                    "label rate {} for category {:?} outside [0,1]",
                    c.label_rate, c.name
                )));
            }
            for p in [c.score_model.positive, c.score_model.negative] {
                if !(p.alpha > 0.0 && p.beta > 0.0) {
                    return Err(Error::domain(format!(
                        "Beta parameters must be positive in category {:?}",
                        c.name
                    )));
                }
            }
        }
        if self.arms.is_empty() {
            return Err(Error::domain("at least one arm is required"));
        }
        let mut arm_names = std::collections::BTreeSet::new();
        for a in &self.arms {
            if !arm_names.insert(&a.name) {
                return Err(Error::domain(format!("duplicate arm {:?}", a.name)));
            }
            if let Some(f) = &a.filter {
                if !(0.0..=1.0).contains(&f.tau) {
                    return Err(Error::domain(format!(
                        "filter threshold {} outside [0,1] in arm {:?}",
                        f.tau, a.name
                    )));
                }
                if !self.categories.iter().any(|c| c.name == f.category) {
                    return Err(Error::domain(format!(
                        "arm {:?} filters on unknown category {:?}",
                        a.name, f.category
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ground truth for one category: per-item labels and scores.
#[derive(Debug, Clone)]
struct CategoryTruth {
    labels: Vec<bool>,
    scores: Vec<f64>,
}

/// A fully materialized synthetic world.
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    /// Sorted by (day, user, item, arm) — the aggregation grain.
    pub records: Vec<ImpressionRecord>,
    item_ids: Vec<String>,
    item_index: BTreeMap<String, usize>,
    truth: BTreeMap<String, CategoryTruth>,
}

fn item_name(idx: usize) -> String {
    format!("item-{idx:06}")
}

fn user_name(idx: usize) -> String {
    format!("user-{idx:06}")
}

/// Generate a world from its configuration. Deterministic in `config`.
pub fn generate_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let n = config.items;

    // Ground truth per category: label then label-conditional score.
    let mut truth: BTreeMap<String, CategoryTruth> = BTreeMap::new();
    for cat in &config.categories {
        let mut labels = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        let cat_key = fnv1a(cat.name.as_bytes());
        let beta_pos = Beta::new(cat.score_model.positive.alpha, cat.score_model.positive.beta)
            .map_err(|e| Error::domain(format!("invalid positive Beta: {e}")))?;
        let beta_neg = Beta::new(cat.score_model.negative.alpha, cat.score_model.negative.beta)
            .map_err(|e| Error::domain(format!("invalid negative Beta: {e}")))?;
        for idx in 0..n {
            let mut label_rng = KeyedRng::new(config.seed, &[stream::LABEL, cat_key, idx as u64]);
            let label = label_rng.open01() < cat.label_rate;
            let mut score_rng = KeyedRng::new(config.seed, &[stream::SCORE, cat_key, idx as u64]);
            let dist = if label { &beta_pos } else { &beta_neg };
            let score: f64 = dist.sample(&mut score_rng).clamp(0.0, 1.0);
            labels.push(label);
            scores.push(score);
        }
        truth.insert(cat.name.clone(), CategoryTruth { labels, scores });
    }

    // Popularity weights (power law over item index) and per-arm exposure
    // tables: the treatment process is the control process with filtered
    // items dropped and their mass re-allocated proportionally, which is
    // exactly a draw from the renormalized survivor distribution.
    let popularity: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((i + 1) as f64).powf(config.popularity_exponent))
        .collect();
    let mut arm_tables: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(config.arms.len());
    for arm in &config.arms {
        let survivors: Vec<usize> = match &arm.filter {
            None => (0..n).collect(),
            Some(f) => {
                let scores = &truth[&f.category].scores;
                (0..n).filter(|&i| scores[i] < f.tau).collect()
            }
        };
        if survivors.is_empty() {
            return Err(Error::domain(format!(
                "filter in arm {:?} leaves no items to expose",
                arm.name
            )));
        }
        let mut cum = Vec::with_capacity(survivors.len());
        let mut acc = 0.0;
        for &i in &survivors {
            acc += popularity[i];
            cum.push(acc);
        }
        arm_tables.push((survivors, cum));
    }

    let poisson = Poisson::new(config.mean_impressions_per_user_day)
        .map_err(|e| Error::domain(format!("invalid impression mean: {e}")))?;

    // Users are assigned to arms once, up front; each (user, day) then has
    // its own keyed streams for the impression count and the item draws.
    struct UserDraw {
        name: String,
        key: u64,
        arm_idx: usize,
    }
    let users: Vec<UserDraw> = (0..config.users)
        .map(|user_idx| {
            let name = user_name(user_idx);
            let key = fnv1a(name.as_bytes());
            let arm_idx =
                KeyedRng::new(config.seed, &[stream::ARM, key]).below(config.arms.len());
            UserDraw { name, key, arm_idx }
        })
        .collect();

    // Emit records directly in (day, user, item, arm) order: days ascend,
    // user and item names are zero-padded so index order is name order, and
    // a user appears in exactly one arm.
    let mut records: Vec<ImpressionRecord> = Vec::new();
    let mut per_item: BTreeMap<usize, u64> = BTreeMap::new();
    for day_idx in 0..config.days {
        let day = config.start_day + chrono::Days::new(day_idx as u64);
        for user in &users {
            let (survivors, cum) = &arm_tables[user.arm_idx];
            let total_weight = *cum.last().expect("non-empty survivor table");
            let mut count_rng = KeyedRng::new(
                config.seed,
                &[stream::IMPRESSION_COUNT, day_idx as u64, user.key],
            );
            let count = poisson.sample(&mut count_rng) as u64;
            if count == 0 {
                continue;
            }
            let mut item_rng = KeyedRng::new(
                config.seed,
                &[stream::IMPRESSION_ITEM, day_idx as u64, user.key],
            );
            per_item.clear();
            for _ in 0..count {
                let target = item_rng.open01() * total_weight;
                let pos = cum.partition_point(|&c| c <= target).min(survivors.len() - 1);
                *per_item.entry(survivors[pos]).or_insert(0) += 1;
            }
            let arm_name = &config.arms[user.arm_idx].name;
            for (&item_idx, &impressions) in &per_item {
                records.push(ImpressionRecord {
                    day,
                    user: user.name.clone(),
                    item: item_name(item_idx),
                    arm: arm_name.clone(),
                    impressions,
                });
            }
        }
    }

    let item_ids: Vec<String> = (0..n).map(item_name).collect();
    let item_index = item_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    Ok(World {
        config: config.clone(),
        records,
        item_ids,
        item_index,
        truth,
    })
}

impl World {
    /// Scores of every item for every category.
    pub fn score_table(&self) -> ScoreTable {
        let mut table = ScoreTable::new();
        for (category, truth) in &self.truth {
            for (idx, &score) in truth.scores.iter().enumerate() {
                table
                    .insert(ScoreRecord {
                        item: self.item_ids[idx].clone(),
                        category: category.clone(),
                        score,
                    })
                    .expect("generated scores are unique and in range");
            }
        }
        table
    }

    /// True labels of every item for every category.
    pub fn label_table(&self) -> LabelTable {
        let mut table = LabelTable::new();
        for (category, truth) in &self.truth {
            for (idx, &label) in truth.labels.iter().enumerate() {
                table
                    .insert(&self.item_ids[idx], category, label)
                    .expect("generated labels are unique");
            }
        }
        table
    }

    /// All (item, category, label) triples, for file emission.
    pub fn label_rows(&self) -> Vec<(&str, &str, bool)> {
        let mut rows = Vec::new();
        for (category, truth) in &self.truth {
            for (idx, &label) in truth.labels.iter().enumerate() {
                rows.push((self.item_ids[idx].as_str(), category.as_str(), label));
            }
        }
        rows
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.truth.keys().map(String::as_str)
    }

    fn category_truth(&self, category: &str) -> Result<&CategoryTruth> {
        self.truth
            .get(category)
            .ok_or_else(|| Error::domain(format!("world has no category {category:?}")))
    }

    /// Exact oracle prevalence of `category` in `segment`.
    pub fn true_prevalence(&self, segment: &Segment, category: &str) -> Result<f64> {
        let truth = self.category_truth(category)?;
        let mut labeled: u64 = 0;
        let mut total: u64 = 0;
        for r in self.records.iter().filter(|r| segment.matches(r)) {
            total += r.impressions;
            let idx = self.item_index[&r.item];
            if truth.labels[idx] {
                labeled += r.impressions;
            }
        }
        if total == 0 {
            return Err(Error::domain(format!(
                "segment {} is empty in this world",
                segment.label()
            )));
        }
        Ok(labeled as f64 / total as f64)
    }

    /// Exact impression-weighted `P(Z = 1 | score in bucket)`.
    ///
    /// Returns `None` for buckets with no impressions.
    pub fn true_bucket_prevalence(
        &self,
        buckets: &Bucketization,
        bucket: usize,
        category: &str,
    ) -> Result<Option<f64>> {
        let counts = self.bucket_truth_counts(buckets, category)?;
        let (labeled, total) = counts[bucket - 1];
        if total == 0 {
            return Ok(None);
        }
        Ok(Some(labeled as f64 / total as f64))
    }

    /// Per-bucket (labeled impressions, total impressions) over all arms.
    pub fn bucket_truth_counts(
        &self,
        buckets: &Bucketization,
        category: &str,
    ) -> Result<Vec<(u64, u64)>> {
        let truth = self.category_truth(category)?;
        let mut counts = vec![(0u64, 0u64); buckets.len()];
        for r in &self.records {
            let idx = self.item_index[&r.item];
            let bucket = buckets.bucket_of(truth.scores[idx])?;
            let slot = &mut counts[bucket - 1];
            slot.1 += r.impressions;
            if truth.labels[idx] {
                slot.0 += r.impressions;
            }
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_config() -> WorldConfig {
        WorldConfig {
            items: 500,
            users: 120,
            days: 3,
            start_day: "2025-06-01".parse().unwrap(),
            seed: 7,
            mean_impressions_per_user_day: 8.0,
            popularity_exponent: 1.1,
            categories: vec![CategoryConfig {
                name: "unsafe".into(),
                label_rate: 0.05,
                score_model: ScoreModel {
                    positive: BetaParams { alpha: 6.0, beta: 2.0 },
                    negative: BetaParams { alpha: 1.0, beta: 10.0 },
                },
            }],
            arms: vec![
                ArmConfig {
                    name: "control".into(),
                    filter: None,
                },
                ArmConfig {
                    name: "treatment".into(),
                    filter: Some(ThresholdFilter {
                        category: "unsafe".into(),
                        tau: 0.7,
                    }),
                },
            ],
        }
    }

    #[test]
    fn config_validation() {
        let mut c = base_config();
        c.items = 0;
        assert!(generate_world(&c).is_err());

        let mut c = base_config();
        c.categories[0].label_rate = 1.2;
        assert!(generate_world(&c).is_err());

        let mut c = base_config();
        c.arms[1].filter.as_mut().unwrap().tau = 1.5;
        assert!(generate_world(&c).is_err());

        let mut c = base_config();
        c.arms[1].filter.as_mut().unwrap().category = "nope".into();
        assert!(generate_world(&c).is_err());

        let mut c = base_config();
        c.arms.push(c.arms[0].clone());
        assert!(generate_world(&c).is_err());
    }

    #[test]
    fn determinism_same_seed_identical_world() {
        let c = base_config();
        let w1 = generate_world(&c).unwrap();
        let w2 = generate_world(&c).unwrap();
        assert_eq!(w1.records, w2.records);

        let mut other = c.clone();
        other.seed = 8;
        let w3 = generate_world(&other).unwrap();
        assert_ne!(w1.records, w3.records);
    }

    #[test]
    fn zero_label_rate_means_zero_prevalence_everywhere() {
        let mut c = base_config();
        c.categories[0].label_rate = 0.0;
        let w = generate_world(&c).unwrap();
        assert_eq!(w.true_prevalence(&Segment::all(), "unsafe").unwrap(), 0.0);
        for arm in ["control", "treatment"] {
            assert_eq!(w.true_prevalence(&Segment::arm(arm), "unsafe").unwrap(), 0.0);
        }
    }

    #[test]
    fn all_positive_labels_mean_prevalence_one() {
        let mut c = base_config();
        c.categories[0].label_rate = 1.0;
        c.arms.truncate(1); // the tau filter would drop every item
        let w = generate_world(&c).unwrap();
        assert_eq!(w.true_prevalence(&Segment::all(), "unsafe").unwrap(), 1.0);
    }

    #[test]
    fn unit_threshold_filter_is_a_no_op() {
        let mut with_noop_filter = base_config();
        with_noop_filter.arms[1].filter = Some(ThresholdFilter {
            category: "unsafe".into(),
            tau: 1.0,
        });
        let mut without_filter = base_config();
        without_filter.arms[1].filter = None;
        let w1 = generate_world(&with_noop_filter).unwrap();
        let w2 = generate_world(&without_filter).unwrap();
        assert_eq!(w1.records, w2.records);
    }

    #[test]
    fn informative_filter_lowers_treatment_prevalence() {
        let w = generate_world(&base_config()).unwrap();
        let control = w.true_prevalence(&Segment::arm("control"), "unsafe").unwrap();
        let treatment = w
            .true_prevalence(&Segment::arm("treatment"), "unsafe")
            .unwrap();
        assert!(
            treatment < control,
            "treatment {treatment} not below control {control}"
        );
    }

    #[test]
    fn hand_built_prevalence_arithmetic() {
        // Two items: (Z=1, I=30), (Z=0, I=70) -> 0.3.
        let config = base_config();
        let day: Day = "2025-06-01".parse().unwrap();
        let records = vec![
            ImpressionRecord {
                day,
                user: "u1".into(),
                item: "item-000000".into(),
                arm: "control".into(),
                impressions: 30,
            },
            ImpressionRecord {
                day,
                user: "u2".into(),
                item: "item-000001".into(),
                arm: "control".into(),
                impressions: 70,
            },
        ];
        let mut truth = BTreeMap::new();
        truth.insert(
            "unsafe".to_string(),
            CategoryTruth {
                labels: vec![true, false],
                scores: vec![0.9, 0.1],
            },
        );
        let item_ids = vec![item_name(0), item_name(1)];
        let item_index = item_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let w = World {
            config,
            records,
            item_ids,
            item_index,
            truth,
        };
        assert_abs_diff_eq!(
            w.true_prevalence(&Segment::all(), "unsafe").unwrap(),
            0.3,
            epsilon = 1e-15
        );
        // Bucket 10 holds only the labeled item; bucket 2 only the clean one.
        let buckets = Bucketization::equal_width(10).unwrap();
        assert_eq!(
            w.true_bucket_prevalence(&buckets, 10, "unsafe").unwrap(),
            Some(1.0)
        );
        assert_eq!(
            w.true_bucket_prevalence(&buckets, 2, "unsafe").unwrap(),
            Some(0.0)
        );
        assert_eq!(w.true_bucket_prevalence(&buckets, 5, "unsafe").unwrap(), None);
    }

    #[test]
    fn empty_segment_rejected() {
        let w = generate_world(&base_config()).unwrap();
        assert!(w.true_prevalence(&Segment::arm("nonexistent"), "unsafe").is_err());
        assert!(w.true_prevalence(&Segment::all(), "nonexistent").is_err());
    }

    #[test]
    fn uninformative_scores_give_flat_bucket_prevalences() {
        let mut c = base_config();
        c.items = 4000;
        c.users = 300;
        c.popularity_exponent = 0.0; // uniform popularity to reduce noise
        c.categories[0].label_rate = 0.3;
        c.categories[0].score_model = ScoreModel {
            positive: BetaParams { alpha: 2.0, beta: 2.0 },
            negative: BetaParams { alpha: 2.0, beta: 2.0 },
        };
        c.arms.truncate(1);
        let w = generate_world(&c).unwrap();
        let buckets = Bucketization::equal_width(5).unwrap();
        let global = w.true_prevalence(&Segment::all(), "unsafe").unwrap();
        for b in 1..=5 {
            if let Some(p) = w.true_bucket_prevalence(&buckets, b, "unsafe").unwrap() {
                assert!(
                    (p - global).abs() < 0.06,
                    "bucket {b} prevalence {p} far from global {global}"
                );
            }
        }
    }

    #[test]
    fn informative_scores_give_monotone_bucket_prevalences() {
        let mut c = base_config();
        c.items = 5000;
        c.users = 400;
        c.categories[0].label_rate = 0.15;
        c.arms.truncate(1);
        let w = generate_world(&c).unwrap();
        let buckets = Bucketization::equal_width(10).unwrap();
        let mut last = -1.0;
        for b in 1..=10 {
            if let Some(p) = w.true_bucket_prevalence(&buckets, b, "unsafe").unwrap() {
                assert!(
                    p >= last - 1e-12,
                    "bucket {b} prevalence {p} below previous {last}"
                );
                last = p;
            }
        }
    }

    // Law of total probability on exact integer counts.
    #[test]
    fn oracle_self_consistency() {
        let w = generate_world(&base_config()).unwrap();
        let buckets = Bucketization::equal_width(10).unwrap();
        let counts = w.bucket_truth_counts(&buckets, "unsafe").unwrap();
        let total: u64 = counts.iter().map(|&(_, t)| t).sum();
        let mixed: f64 = counts
            .iter()
            .filter(|&&(_, t)| t > 0)
            .map(|&(l, t)| (t as f64 / total as f64) * (l as f64 / t as f64))
            .sum();
        let global = w.true_prevalence(&Segment::all(), "unsafe").unwrap();
        assert_abs_diff_eq!(mixed, global, epsilon = 1e-12);
    }

    #[test]
    fn heavy_tail_puts_most_impressions_in_lowest_bucket() {
        let mut c = base_config();
        c.items = 5000;
        c.users = 300;
        c.popularity_exponent = 1.5;
        c.categories[0].label_rate = 0.02;
        c.categories[0].score_model.negative = BetaParams { alpha: 1.0, beta: 25.0 };
        c.arms.truncate(1);
        let w = generate_world(&c).unwrap();
        let buckets = Bucketization::equal_width(10).unwrap();
        let counts = w.bucket_truth_counts(&buckets, "unsafe").unwrap();
        let total: u64 = counts.iter().map(|&(_, t)| t).sum();
        let lowest_share = counts[0].1 as f64 / total as f64;
        assert!(
            (0.6..=1.0).contains(&lowest_share),
            "lowest bucket holds {lowest_share:.3} of impressions, expected at least 0.6"
        );
    }

    #[test]
    fn tables_expose_ground_truth() {
        let w = generate_world(&base_config()).unwrap();
        let scores = w.score_table();
        let labels = w.label_table();
        use crate::datamodel::LabelSource;
        assert_eq!(scores.len(), w.config.items);
        assert_eq!(labels.len(), w.config.items);
        let s = scores.score("unsafe", "item-000000").unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert!(labels.label("item-000000", "unsafe").is_some());
    }
}
