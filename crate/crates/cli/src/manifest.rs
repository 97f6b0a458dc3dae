use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Command;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Everything needed to re-run a command and check that it reproduced.
///
/// `command` holds the full argument set; for `simulate` the resolved
/// configuration is embedded so replays do not depend on profile lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default = "dtofkit::default_schema_version")]
    pub schema_version: u32,
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: Option<dtofkit::SimConfig>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub tool_version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        dtofkit::check_schema_version(manifest.schema_version)?;
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        dtofkit::io::write_json(path, self)?;
        Ok(())
    }
}

/// `out.png` → `out.<suffix>`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}
