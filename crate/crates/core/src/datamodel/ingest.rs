//! File ingestion and emission for the line-delimited input formats.
//!
//! Every input is a text file with one JSON object per line (blank lines are
//! ignored). Malformed rows are reported with their path and line number.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::buckets::{BucketScheme, Bucketization};
use super::labels::LabelTable;
use super::records::{Day, ImpressionRecord, ScoreRecord, ScoreTable};
use crate::error::{Error, Result};

/// Outcome of ingesting an impression log.
#[derive(Debug, Clone)]
pub struct LogIngest {
    /// Aggregated to the (day, user, item, arm) grain, sorted by that grain.
    pub records: Vec<ImpressionRecord>,
    /// Number of non-blank input rows read (before aggregation).
    pub rows: usize,
    /// Total impressions across all records.
    pub total_impressions: u64,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

/// Visit each non-blank line as a parsed row with its 1-based line number.
fn for_each_row<T, F>(path: &Path, mut visit: F) -> Result<()>
where
    T: DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    let reader = open(path)?;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: T = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path.display().to_string(), lineno, e.to_string()))?;
        visit(lineno, row)?;
    }
    Ok(())
}

/// Attach a line number to domain errors raised while validating a row.
fn at_line(path: &Path, lineno: usize, err: Error) -> Error {
    match err {
        Error::Domain(msg) => Error::parse(path.display().to_string(), lineno, msg),
        other => other,
    }
}

#[derive(Deserialize)]
struct RawLogRow {
    day: Day,
    user: String,
    item: String,
    arm: String,
    impressions: i64,
}

/// Read an impression log, validating and aggregating by grain.
pub fn ingest_logs(path: impl AsRef<Path>) -> Result<LogIngest> {
    let path = path.as_ref();
    let mut by_grain: BTreeMap<(Day, String, String, String), u64> = BTreeMap::new();
    let mut rows = 0usize;
    for_each_row(path, |lineno, row: RawLogRow| {
        rows += 1;
        if row.impressions < 0 {
            return Err(Error::parse(
                path.display().to_string(),
                lineno,
                format!("negative impression count {}", row.impressions),
            ));
        }
        if row.impressions == 0 {
            return Ok(()); // zero-impression rows carry no information
        }
        *by_grain.entry((row.day, row.user, row.item, row.arm)).or_insert(0) +=
            row.impressions as u64;
        Ok(())
    })?;
    let mut total_impressions = 0u64;
    let records = by_grain
        .into_iter()
        .map(|((day, user, item, arm), impressions)| {
            total_impressions += impressions;
            ImpressionRecord {
                day,
                user,
                item,
                arm,
                impressions,
            }
        })
        .collect();
    Ok(LogIngest {
        records,
        rows,
        total_impressions,
    })
}

/// Read a score file into a [`ScoreTable`].
pub fn ingest_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let mut table = ScoreTable::new();
    for_each_row(path, |lineno, row: ScoreRecord| {
        table.insert(row).map_err(|e| at_line(path, lineno, e))
    })?;
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct RawLabelRow {
    item: String,
    category: String,
    label: u8,
}

/// Read a bulk-labeling output file into a [`LabelTable`].
pub fn ingest_labels(path: impl AsRef<Path>) -> Result<LabelTable> {
    let path = path.as_ref();
    let mut table = LabelTable::new();
    for_each_row(path, |lineno, row: RawLabelRow| {
        if row.label > 1 {
            return Err(Error::parse(
                path.display().to_string(),
                lineno,
                format!("label must be 0 or 1, got {}", row.label),
            ));
        }
        table
            .insert(&row.item, &row.category, row.label == 1)
            .map_err(|e| at_line(path, lineno, e))
    })?;
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct RawBucketRow {
    category: String,
    boundaries: Vec<f64>,
    scheme: BucketScheme,
}

/// Read per-category bucketizations.
pub fn ingest_buckets(path: impl AsRef<Path>) -> Result<BTreeMap<String, Bucketization>> {
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    for_each_row(path, |lineno, row: RawBucketRow| {
        let b = Bucketization::from_parts(row.boundaries, row.scheme)
            .map_err(|e| at_line(path, lineno, e))?;
        if out.insert(row.category.clone(), b).is_some() {
            return Err(Error::parse(
                path.display().to_string(),
                lineno,
                format!("duplicate bucketization for category {}", row.category),
            ));
        }
        Ok(())
    })?;
    Ok(out)
}

/// Write any serializable rows as one JSON object per line.
pub fn write_ndjson<T: Serialize>(
    path: impl AsRef<Path>,
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let ctx = || format!("writing {}", path.display());
    for row in rows {
        let line = serde_json::to_string(&row)
            .map_err(|e| Error::domain(format!("serializing row for {}: {e}", path.display())))?;
        w.write_all(line.as_bytes()).map_err(|e| Error::io(ctx(), e))?;
        w.write_all(b"\n").map_err(|e| Error::io(ctx(), e))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

/// Write an impression log.
pub fn write_logs<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a ImpressionRecord>,
) -> Result<()> {
    write_ndjson(path, records)
}

/// Write a score file (rows sorted by category, then item).
pub fn write_scores(path: impl AsRef<Path>, table: &ScoreTable) -> Result<()> {
    let rows = table.categories().flat_map(|category| {
        table.items_in(category).map(move |(item, score)| ScoreRecord {
            item: item.to_string(),
            category: category.to_string(),
            score,
        })
    });
    // Collect first: the iterator borrows `table` across the write.
    write_ndjson(path, rows.collect::<Vec<_>>())
}

/// Write labels in the bulk-output format.
pub fn write_labels<'a>(
    path: impl AsRef<Path>,
    rows: impl IntoIterator<Item = (&'a str, &'a str, bool)>,
) -> Result<()> {
    write_ndjson(
        path,
        rows.into_iter().map(|(item, category, label)| RawLabelRow {
            item: item.to_string(),
            category: category.to_string(),
            label: label as u8,
        }),
    )
}

/// Write per-category bucketizations.
pub fn write_buckets<'a>(
    path: impl AsRef<Path>,
    buckets: impl IntoIterator<Item = (&'a str, &'a Bucketization)>,
) -> Result<()> {
    write_ndjson(
        path,
        buckets.into_iter().map(|(category, b)| RawBucketRow {
            category: category.to_string(),
            boundaries: b.boundaries().to_vec(),
            scheme: b.scheme(),
        }),
    )
}
