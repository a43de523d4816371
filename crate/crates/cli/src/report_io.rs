//! Reading and writing line-delimited report files.
//!
//! Every report starts with one manifest line, then one tagged row per
//! result, so a report is self-describing and replayable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use prevalence_core::inference::InferenceReport;
use prevalence_core::report::{DeltaRow, EstimateRow, OracleRow, SimulationRow};
use prevalence_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

/// One line of a report file, discriminated by the `kind` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportLine {
    Manifest(RunManifest),
    Oracle(OracleRow),
    Estimate(EstimateRow),
    Delta(DeltaRow),
    Simulation(SimulationRow),
    Inference(InferenceReport),
}

/// Write a report: manifest first, then rows.
pub fn write_report<'a>(
    path: &Path,
    manifest: &RunManifest,
    rows: impl IntoIterator<Item = &'a ReportLine>,
) -> Result<()> {
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: &ReportLine| -> Result<()> {
        let body = serde_json::to_string(line)
            .map_err(|e| Error::domain(format!("serializing report row: {e}")))?;
        writeln!(out, "{body}").map_err(|e| Error::io(format!("writing {}", path.display()), e))
    };
    emit(&ReportLine::Manifest(manifest.clone()))?;
    for row in rows {
        emit(row)?;
    }
    out.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read every line of a report file.
pub fn read_report(path: &Path) -> Result<Vec<ReportLine>> {
    let file =
        File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut lines = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ReportLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path.display().to_string(), idx + 1, e.to_string()))?;
        lines.push(parsed);
    }
    Ok(lines)
}
