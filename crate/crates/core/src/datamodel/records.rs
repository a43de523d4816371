//! Log and score record types.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar date; the only time grain in the pipeline.
pub type Day = chrono::NaiveDate;

/// One aggregated impression-log row at the (day, user, item, arm) grain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImpressionRecord {
    pub day: Day,
    pub user: String,
    pub item: String,
    pub arm: String,
    pub impressions: u64,
}

/// One model score for an (item, category) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub item: String,
    pub category: String,
    pub score: f64,
}

/// Scores grouped by category for O(log) item lookup.
///
/// At most one score per (item, category); the map is deterministic in
/// iteration order so downstream artifacts serialize identically across runs.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    by_category: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a score, rejecting conflicting duplicates.
    pub fn insert(&mut self, record: ScoreRecord) -> Result<()> {
        if !(0.0..=1.0).contains(&record.score) {
            return Err(Error::domain(format!(
                "score {} for item {} category {} outside [0,1]",
                record.score, record.item, record.category
            )));
        }
        let per_item = self.by_category.entry(record.category.clone()).or_default();
        match per_item.get(&record.item) {
            Some(&existing) if existing != record.score => Err(Error::domain(format!(
                "conflicting scores for item {} category {}: {} vs {}",
                record.item, record.category, existing, record.score
            ))),
            Some(_) => Ok(()),
            None => {
                per_item.insert(record.item, record.score);
                Ok(())
            }
        }
    }

    /// Score for (category, item) if one was ingested.
    pub fn score(&self, category: &str, item: &str) -> Option<f64> {
        self.by_category.get(category)?.get(item).copied()
    }

    /// Categories present in the table, sorted.
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.by_category.keys().map(String::as_str)
    }

    /// All (item, score) pairs for a category, sorted by item.
    pub fn items_in(&self, category: &str) -> impl Iterator<Item = (&str, f64)> {
        self.by_category
            .get(category)
            .into_iter()
            .flat_map(|m| m.iter().map(|(item, &s)| (item.as_str(), s)))
    }

    pub fn len(&self) -> usize {
        self.by_category.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(item: &str, category: &str, score: f64) -> ScoreRecord {
        ScoreRecord {
            item: item.to_string(),
            category: category.to_string(),
            score,
        }
    }

    #[test]
    fn score_table_lookup_and_exact_duplicate() {
        let mut table = ScoreTable::new();
        table.insert(rec("a", "k", 0.4)).unwrap();
        table.insert(rec("a", "k", 0.4)).unwrap(); // exact duplicate is fine
        table.insert(rec("a", "other", 0.9)).unwrap();
        assert_eq!(table.score("k", "a"), Some(0.4));
        assert_eq!(table.score("other", "a"), Some(0.9));
        assert_eq!(table.score("k", "missing"), None);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn score_table_rejects_conflicts_and_range() {
        let mut table = ScoreTable::new();
        table.insert(rec("a", "k", 0.4)).unwrap();
        assert!(table.insert(rec("a", "k", 0.5)).is_err());
        assert!(table.insert(rec("b", "k", 1.5)).is_err());
        assert!(table.insert(rec("b", "k", -0.1)).is_err());
    }
}
