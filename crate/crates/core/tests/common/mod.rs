//! Shared fixtures for integration tests: small fully-known populations
//! where every oracle quantity is computed by direct summation.

use prevalence_core::datamodel::{Day, ImpressionRecord, LabelTable, ScoreRecord, ScoreTable};
use prevalence_core::rng::KeyedRng;

pub struct Population {
    pub records: Vec<ImpressionRecord>,
    pub scores: ScoreTable,
    pub labels: LabelTable,
    /// Exact impression-weighted prevalence over the whole population.
    pub true_prevalence: f64,
    pub total_impressions: u64,
}

pub struct PopulationSpec {
    pub seed: u64,
    pub items: usize,
    pub label_rate: f64,
    /// Power-law exponent of per-item impression counts (0 = uniform).
    pub impression_skew: f64,
    /// Impressions of the most popular item.
    pub top_impressions: u64,
    /// Fixed impression count for every item; overrides the power law.
    pub uniform_impressions: Option<u64>,
}

pub const CATEGORY: &str = "unsafe";

/// Build a single-day, single-arm population with Bernoulli labels and
/// label-informative scores. Scores are independent of popularity.
pub fn build_population(spec: &PopulationSpec) -> Population {
    let day: Day = "2025-06-01".parse().unwrap();
    let mut records = Vec::with_capacity(spec.items);
    let mut scores = ScoreTable::new();
    let mut labels = LabelTable::new();
    let mut labeled_impressions = 0u64;
    let mut total_impressions = 0u64;
    for idx in 0..spec.items {
        let item = format!("item-{idx:05}");
        let mut rng = KeyedRng::new(spec.seed, &[0xF1, idx as u64]);
        let label = rng.open01() < spec.label_rate;
        // Label-conditional power transforms keep scores in (0,1) and make
        // high scores indicative of the label.
        let u = rng.open01();
        let score = if label { u.powf(0.35) } else { u.powf(3.0) };
        let impressions = match spec.uniform_impressions {
            Some(c) => c,
            None => {
                let raw = spec.top_impressions as f64
                    / ((idx + 1) as f64).powf(spec.impression_skew);
                raw.ceil() as u64
            }
        };
        total_impressions += impressions;
        if label {
            labeled_impressions += impressions;
        }
        records.push(ImpressionRecord {
            day,
            user: format!("user-{idx:05}"),
            item: item.clone(),
            arm: "control".into(),
            impressions,
        });
        scores
            .insert(ScoreRecord {
                item: item.clone(),
                category: CATEGORY.into(),
                score,
            })
            .unwrap();
        labels.insert(&item, CATEGORY, label).unwrap();
    }
    Population {
        records,
        scores,
        labels,
        true_prevalence: labeled_impressions as f64 / total_impressions as f64,
        total_impressions,
    }
}
