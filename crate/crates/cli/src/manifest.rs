//! Run manifests: every artifact-producing subcommand records its resolved
//! arguments, input digests, and output digests. Re-running the recorded
//! command reproduces the outputs byte for byte (`clickcascade rerun`).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

/// Resolved arguments of one subcommand, exactly as needed to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CommandSpec {
    Extract {
        input: PathBuf,
        lexicons: PathBuf,
        topic_model: Option<PathBuf>,
        output: PathBuf,
    },
    Topics {
        input: PathBuf,
        k_topics: usize,
        alpha: f64,
        beta: f64,
        iterations: usize,
        seed: u64,
        min_doc_freq: usize,
        output: PathBuf,
    },
    Fit {
        features: PathBuf,
        k_folds: usize,
        grid_size: usize,
        grid_ratio: f64,
        rule: String,
        seed: u64,
        output: PathBuf,
    },
    Simulate {
        config: PathBuf,
        output_dir: PathBuf,
    },
    Analyze {
        inputs: Vec<PathBuf>,
        output: PathBuf,
        bootstrap_resamples: usize,
        bootstrap_seed: u64,
        degrees: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(flatten)]
    pub command: CommandSpec,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read {} for digest", path.display()))?;
    Ok(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
}

impl Manifest {
    pub fn new(command: CommandSpec, inputs: Vec<FileDigest>, outputs: Vec<FileDigest>) -> Self {
        Manifest { schema_version: MANIFEST_VERSION, command, inputs, outputs }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)? + "\n";
        clickcascade_core::io::write_atomic(path, json.as_bytes())
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&raw)
            .with_context(|| format!("cannot parse manifest {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        // echo -n "abc" | sha256sum
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip() {
        let manifest = Manifest::new(
            CommandSpec::Fit {
                features: "features.csv".into(),
                k_folds: 5,
                grid_size: 100,
                grid_ratio: 1e-3,
                rule: "min".into(),
                seed: 7,
                output: "model.json".into(),
            },
            vec![FileDigest { path: "features.csv".into(), sha256: "x".into() }],
            vec![],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        manifest.save(&path).unwrap();
        assert_eq!(Manifest::load(&path).unwrap(), manifest);
    }
}
