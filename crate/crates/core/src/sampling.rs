//! PPSWOR sample selection via single-pass weighted reservoir sampling.
//!
//! Each offered item receives a key `U^(1/w)` for a per-item uniform `U`;
//! the reservoir keeps the `n` largest keys. Keys are compared in log space
//! (`ln U / w`), which is order-equivalent and avoids underflow for large
//! weights. Sampling probabilities attached at finalization follow
//! `p_i = w_i / total_weight` with the total taken over the full population.

use std::cmp::Ordering;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{ingest::write_ndjson, ImpressionRecord, ScoreTable, Segment};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, stream, KeyedRng};

/// How sampling weights derive from impressions and scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleWeightScheme {
    /// `w = I`: plain impression weighting.
    #[serde(rename = "impressions")]
    ImpressionsOnly,
    /// `w = I * m`: impression-times-score weighting, boosting the inclusion
    /// probability of higher-score items.
    #[serde(rename = "impressions-x-score")]
    ImpressionsTimesScore,
}

impl SampleWeightScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleWeightScheme::ImpressionsOnly => "impressions",
            SampleWeightScheme::ImpressionsTimesScore => "impressions-x-score",
        }
    }
}

impl std::str::FromStr for SampleWeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "impressions" => Ok(SampleWeightScheme::ImpressionsOnly),
            "impressions-x-score" => Ok(SampleWeightScheme::ImpressionsTimesScore),
            other => Err(Error::domain(format!(
                "unknown weight scheme {other:?}; expected impressions or impressions-x-score"
            ))),
        }
    }
}

/// Sampling weight of one item under a scheme.
pub fn compute_weight(impressions: u64, score: f64, scheme: SampleWeightScheme) -> f64 {
    match scheme {
        SampleWeightScheme::ImpressionsOnly => impressions as f64,
        SampleWeightScheme::ImpressionsTimesScore => impressions as f64 * score,
    }
}

#[derive(Debug, Clone)]
struct Entry {
    /// `ln(U) / w`; strictly negative, larger is better.
    log_key: f64,
    item: String,
    weight: f64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Equal keys (a finite-precision event) rank the lexicographically
        // smaller item id higher so eviction is deterministic.
        self.log_key
            .total_cmp(&other.log_key)
            .then_with(|| other.item.cmp(&self.item))
    }
}

/// Streaming top-`n`-by-key reservoir implementing PPSWOR selection.
#[derive(Debug, Clone)]
pub struct WeightedReservoir {
    capacity: usize,
    heap: BinaryHeap<Reverse<Entry>>,
}

impl WeightedReservoir {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::domain("reservoir capacity must be positive"));
        }
        Ok(WeightedReservoir {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Offer one item. Each distinct item must be offered at most once.
    ///
    /// Zero-weight items are skipped (they are never selected); the uniform
    /// draw must lie strictly inside (0,1).
    pub fn offer(&mut self, item: &str, weight: f64, uniform_draw: f64) -> Result<()> {
        if !(uniform_draw > 0.0 && uniform_draw < 1.0) {
            return Err(Error::domain(format!(
                "uniform draw {uniform_draw} outside the open interval (0,1)"
            )));
        }
        if weight < 0.0 || weight.is_nan() {
            return Err(Error::domain(format!("negative sampling weight {weight}")));
        }
        if weight == 0.0 {
            return Ok(());
        }
        let entry = Entry {
            log_key: uniform_draw.ln() / weight,
            item: item.to_string(),
            weight,
        };
        if self.heap.len() < self.capacity {
            self.heap.push(Reverse(entry));
        } else if self
            .heap
            .peek()
            .is_some_and(|Reverse(min)| entry > *min)
        {
            self.heap.pop();
            self.heap.push(Reverse(entry));
        }
        Ok(())
    }

    /// Combine two reservoirs built over disjoint item partitions.
    pub fn merge(mut self, other: WeightedReservoir) -> Result<WeightedReservoir> {
        if self.capacity != other.capacity {
            return Err(Error::domain(format!(
                "cannot merge reservoirs of capacities {} and {}",
                self.capacity, other.capacity
            )));
        }
        let mine: BTreeSet<&str> = self.heap.iter().map(|Reverse(e)| e.item.as_str()).collect();
        if other
            .heap
            .iter()
            .any(|Reverse(e)| mine.contains(e.item.as_str()))
        {
            return Err(Error::domain(
                "merge requires disjoint item sets between reservoirs",
            ));
        }
        for Reverse(entry) in other.heap {
            if self.heap.len() < self.capacity {
                self.heap.push(Reverse(entry));
            } else if self
                .heap
                .peek()
                .is_some_and(|Reverse(min)| entry > *min)
            {
                self.heap.pop();
                self.heap.push(Reverse(entry));
            }
        }
        Ok(self)
    }

    /// Selected items sorted by item id, with their weights and keys.
    fn entries_sorted(&self) -> Vec<&Entry> {
        let mut entries: Vec<&Entry> = self.heap.iter().map(|Reverse(e)| e).collect();
        entries.sort_by(|a, b| a.item.cmp(&b.item));
        entries
    }

    /// Selected item ids, sorted.
    pub fn selected_items(&self) -> Vec<String> {
        self.entries_sorted().iter().map(|e| e.item.clone()).collect()
    }

    /// Attach Eq.-style sampling probabilities using the full-population
    /// total weight (computed from the complete logs, not the sample).
    pub fn finalize(&self, population_total_weight: f64) -> Result<DrawnSample> {
        if !(population_total_weight > 0.0) {
            return Err(Error::domain(format!(
                "population total weight must be positive, got {population_total_weight}"
            )));
        }
        let entries = self.entries_sorted();
        if let Some(max) = entries
            .iter()
            .map(|e| e.weight)
            .max_by(f64::total_cmp)
        {
            if max > population_total_weight {
                return Err(Error::domain(format!(
                    "population total weight {population_total_weight} is below the largest sampled weight {max}"
                )));
            }
        }
        let items = entries
            .into_iter()
            .map(|e| SampledItem {
                item: e.item.clone(),
                weight: e.weight,
                sampling_probability: e.weight / population_total_weight,
                key: e.log_key.exp(),
            })
            .collect();
        Ok(DrawnSample {
            items,
            population_total_weight,
        })
    }
}

/// One selected item with its weight, probability, and selection key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledItem {
    pub item: String,
    pub weight: f64,
    pub sampling_probability: f64,
    pub key: f64,
}

/// A finalized PPSWOR sample with full-population weight accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawnSample {
    /// Sorted by item id.
    pub items: Vec<SampledItem>,
    pub population_total_weight: f64,
}

impl DrawnSample {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Diagnostics from drawing a sample out of logs and scores.
#[derive(Debug, Clone, Default)]
pub struct SampleDiagnostics {
    /// Distinct items with impressions in the segment.
    pub population_items: usize,
    /// Items among those with no score for the category (scored as 0).
    pub unscored_items: usize,
    /// Items with positive sampling weight (eligible for selection).
    pub positive_weight_items: usize,
}

/// Aggregate per-item impressions within `segment` and draw a PPSWOR sample.
///
/// Per-item uniforms are keyed by `(seed, item)` from a counter-based
/// generator, so the selected set is invariant to record order and to any
/// partition-and-merge evaluation strategy.
pub fn draw_sample(
    records: &[ImpressionRecord],
    scores: &ScoreTable,
    category: &str,
    segment: &Segment,
    scheme: SampleWeightScheme,
    capacity: usize,
    seed: u64,
) -> Result<(DrawnSample, SampleDiagnostics)> {
    let mut impressions: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| segment.matches(r)) {
        *impressions.entry(r.item.as_str()).or_insert(0) += r.impressions;
    }
    let mut reservoir = WeightedReservoir::new(capacity)?;
    let mut diags = SampleDiagnostics {
        population_items: impressions.len(),
        ..SampleDiagnostics::default()
    };
    let mut total_weight = 0.0f64;
    for (item, &imps) in &impressions {
        let score = match scores.score(category, item) {
            Some(s) => s,
            None => {
                diags.unscored_items += 1;
                0.0
            }
        };
        let weight = compute_weight(imps, score, scheme);
        total_weight += weight;
        if weight > 0.0 {
            diags.positive_weight_items += 1;
            let uniform = item_uniform(seed, item);
            reservoir.offer(item, weight, uniform)?;
        }
    }
    let sample = reservoir.finalize(total_weight)?;
    Ok((sample, diags))
}

/// The per-item uniform used for reservoir keys.
pub fn item_uniform(seed: u64, item: &str) -> f64 {
    KeyedRng::new(seed, &[stream::RESERVOIR, fnv1a(item.as_bytes())]).open01()
}

#[derive(Serialize, Deserialize)]
struct SampleHeader {
    seed: u64,
    scheme: SampleWeightScheme,
    capacity: usize,
    population_total_weight: f64,
}

/// Metadata stored alongside a sample in its output file.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFileMeta {
    pub seed: u64,
    pub scheme: SampleWeightScheme,
    pub capacity: usize,
}

/// Write a sample file: a header object followed by one line per item.
pub fn write_sample(path: impl AsRef<Path>, sample: &DrawnSample, meta: &SampleFileMeta) -> Result<()> {
    let header = serde_json::to_value(SampleHeader {
        seed: meta.seed,
        scheme: meta.scheme,
        capacity: meta.capacity,
        population_total_weight: sample.population_total_weight,
    })
    .expect("header serializes");
    let rows = std::iter::once(header).chain(
        sample
            .items
            .iter()
            .map(|it| serde_json::to_value(it).expect("sampled item serializes")),
    );
    write_ndjson(path, rows)
}

/// Read a sample file written by [`write_sample`].
pub fn read_sample(path: impl AsRef<Path>) -> Result<(DrawnSample, SampleFileMeta)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut header: Option<SampleHeader> = None;
    let mut items: Vec<SampledItem> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(
                serde_json::from_str(&line).map_err(|e| {
                    Error::parse(path.display().to_string(), lineno, format!("sample header: {e}"))
                })?,
            );
        } else {
            items.push(serde_json::from_str(&line).map_err(|e| {
                Error::parse(path.display().to_string(), lineno, e.to_string())
            })?);
        }
    }
    let header = header
        .ok_or_else(|| Error::parse(path.display().to_string(), 1, "missing sample header"))?;
    items.sort_by(|a, b| a.item.cmp(&b.item));
    Ok((
        DrawnSample {
            items,
            population_total_weight: header.population_total_weight,
        },
        SampleFileMeta {
            seed: header.seed,
            scheme: header.scheme,
            capacity: header.capacity,
        },
    ))
}
