//! Segments: deterministic record predicates over arm and day window.

use serde::{Deserialize, Serialize};

use super::records::{Day, ImpressionRecord};

/// A selector over impression records. `None` fields match everything, so
/// the default segment is the whole population.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm: Option<String>,
    /// Inclusive day window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<Day>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<Day>,
}

impl Segment {
    /// The all-records segment.
    pub fn all() -> Self {
        Self::default()
    }

    pub fn arm(arm: impl Into<String>) -> Self {
        Segment {
            arm: Some(arm.into()),
            ..Self::default()
        }
    }

    pub fn with_days(mut self, from: Day, to: Day) -> Self {
        self.from = Some(from);
        self.to = Some(to);
        self
    }

    pub fn on_day(mut self, day: Day) -> Self {
        self.from = Some(day);
        self.to = Some(day);
        self
    }

    pub fn matches(&self, record: &ImpressionRecord) -> bool {
        if let Some(arm) = &self.arm {
            if &record.arm != arm {
                return false;
            }
        }
        if let Some(from) = self.from {
            if record.day < from {
                return false;
            }
        }
        if let Some(to) = self.to {
            if record.day > to {
                return false;
            }
        }
        true
    }

    /// Human-readable label used in report records.
    pub fn label(&self) -> String {
        let arm = self.arm.as_deref().unwrap_or("all");
        match (self.from, self.to) {
            (Some(f), Some(t)) if f == t => format!("{arm}@{f}"),
            (Some(f), Some(t)) => format!("{arm}@{f}..{t}"),
            (Some(f), None) => format!("{arm}@{f}.."),
            (None, Some(t)) => format!("{arm}@..{t}"),
            (None, None) => arm.to_string(),
        }
    }
}
