use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every artifact. Deliberately free of
/// timestamps so identical runs produce identical manifests.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn hashes(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            entries.sort();
            out.extend(hashes(&entries)?);
        } else {
            out.push(FileHash {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            });
        }
    }
    Ok(out)
}

impl RunManifest {
    pub fn write(
        out_dir: &Path,
        command: &str,
        seed: u64,
        config: serde_json::Value,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            seed,
            config,
            inputs: hashes(inputs)?,
            outputs: hashes(outputs)?,
        };
        let path = out_dir.join(format!("{command}.manifest.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
