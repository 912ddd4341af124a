//! Run manifests: what was run, on which inputs, producing which files.
//!
//! Manifests carry no timestamps or thread counts, so a rerun with the same
//! inputs and settings writes the same bytes.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    /// Inputs left out of the analysis, with the reason.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: impl Serialize) -> Result<Self, CliError> {
        Ok(RunManifest {
            tool: "blockscope",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config).map_err(|e| CliError::Data(e.to_string()))?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            skipped: Vec::new(),
        })
    }

    /// Record a file input, or every file below a directory input.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        if path.is_dir() {
            for entry in sorted_entries(path)? {
                self.input(&entry)?;
            }
            return Ok(());
        }
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// `<out>.manifest.json` next to a file output, `manifest.json` inside a
    /// directory output.
    pub fn write(&self, out: &Path, out_is_dir: bool) -> Result<PathBuf, CliError> {
        let path = if out_is_dir {
            out.join("manifest.json")
        } else {
            let mut name = out.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        };
        crate::write_json(&path, self)?;
        Ok(path)
    }
}

pub fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    entries.sort();
    Ok(entries)
}
