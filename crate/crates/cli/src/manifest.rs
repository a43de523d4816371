//! Run manifests: a canonical, digest-bearing record of one command
//! invocation. Two runs with equal manifests must produce byte-identical
//! outputs, so the manifest carries the data window rather than wall-clock
//! time.

use std::collections::BTreeMap;
use std::path::Path;

use prevalence_core::datamodel::Day;
use prevalence_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "prevalence";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// First/last day observed across the command's inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataWindow {
    pub from: Day,
    pub to: Day,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Canonicalized flag values, keyed by flag name.
    pub flags: BTreeMap<String, String>,
    /// SHA-256 of each input file, keyed by flag name.
    pub input_digests: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_window: Option<DataWindow>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            flags: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            seed: None,
            calibration_version: None,
            data_window: None,
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.insert(name.into(), value.to_string());
        self
    }

    pub fn opt_flag(self, name: &str, value: Option<impl ToString>) -> Self {
        match value {
            Some(v) => self.flag(name, v),
            None => self,
        }
    }

    /// Record a flag that names an input file, digesting its content.
    pub fn input(mut self, name: &str, path: &Path) -> Result<Self> {
        self.flags.insert(name.into(), path.display().to_string());
        self.input_digests
            .insert(name.into(), file_digest(path)?);
        Ok(self)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn calibration_version(mut self, version: &str) -> Self {
        self.calibration_version = Some(version.into());
        self
    }

    pub fn window(mut self, range: Option<(Day, Day)>) -> Self {
        self.data_window = range.map(|(from, to)| DataWindow { from, to });
        self
    }

    /// Write the manifest as a standalone sidecar file.
    pub fn write_sidecar(&self, artifact: &Path) -> Result<()> {
        let path = sidecar_path(artifact);
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::domain(format!("serializing manifest: {e}")))?;
        std::fs::write(&path, body + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// `<artifact>.manifest.json` next to the artifact.
pub fn sidecar_path(artifact: &Path) -> std::path::PathBuf {
    let mut name = artifact
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".manifest.json");
    artifact.with_file_name(name)
}

/// SHA-256 digest of a file's bytes, hex-encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
