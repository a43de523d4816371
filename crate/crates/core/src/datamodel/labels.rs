//! Label sources: the abstract provider plus the file-backed table.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Provider of binary labels per (item, category).
///
/// `None` means the source holds no label for the pair, which is distinct
/// from a negative label.
pub trait LabelSource {
    fn label(&self, item: &str, category: &str) -> Option<bool>;
}

/// In-memory label table, typically loaded from a bulk-labeling output file.
#[derive(Debug, Clone, Default)]
pub struct LabelTable {
    by_category: BTreeMap<String, BTreeMap<String, bool>>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a label, rejecting conflicting duplicates.
    pub fn insert(&mut self, item: &str, category: &str, label: bool) -> Result<()> {
        let per_item = self.by_category.entry(category.to_string()).or_default();
        match per_item.get(item) {
            Some(&existing) if existing != label => Err(Error::domain(format!(
                "conflicting labels for item {item} category {category}"
            ))),
            Some(_) => Ok(()),
            None => {
                per_item.insert(item.to_string(), label);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.by_category.values().map(|m| m.len()).sum()
    }

    /// Categories with at least one label, sorted.
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.by_category.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl LabelSource for LabelTable {
    fn label(&self, item: &str, category: &str) -> Option<bool> {
        self.by_category.get(category)?.get(item).copied()
    }
}
