use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io::file_pair;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Ok(Self { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

/// Inputs, parameters and output digests of one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

/// A file on disk, or an array stored as a `.json`/`.bin` pair.
#[derive(Clone, Debug)]
pub enum Artifact {
    File(PathBuf),
    Array(PathBuf),
}

impl Artifact {
    fn paths(&self) -> Vec<PathBuf> {
        match self {
            Artifact::File(p) => vec![p.clone()],
            Artifact::Array(p) => {
                let (json, bin) = file_pair(p);
                vec![json, bin]
            }
        }
    }
}

fn hashes(items: &[Artifact]) -> Result<Vec<FileHash>> {
    items.iter().flat_map(|a| a.paths()).map(|p| FileHash::of(&p)).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, inputs: &[Artifact], outputs: &[Artifact]) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: hashes(inputs)?,
            outputs: hashes(outputs)?,
        })
    }

    /// `<stem>.manifest.json` beside the primary output.
    pub fn path_for(primary: &Path) -> PathBuf {
        let stem = match primary.extension().and_then(|e| e.to_str()) {
            Some("json") | Some("bin") | Some("csv") | Some("jsonl") => primary.with_extension(""),
            _ => primary.to_path_buf(),
        };
        let mut s = stem.into_os_string();
        s.push(".manifest.json");
        s.into()
    }

    pub fn write(&self, primary: &Path) -> Result<PathBuf> {
        let path = Self::path_for(primary);
        fs::write(&path, serde_json::to_vec_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}
