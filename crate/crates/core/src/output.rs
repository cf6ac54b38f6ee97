//! CSV artifacts and the run manifest written next to them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Writes a header row and `rows` to `path`, returning the path.
pub fn write_csv<I, R>(path: impl AsRef<Path>, header: &[String], rows: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let path = path.as_ref().to_path_buf();
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

/// Sidecar document describing how a set of artifacts was produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of `config`.
    pub config_sha256: String,
    /// Full configuration echo (TOML).
    pub config: String,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_toml: String) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_sha256: sha256_hex(config_toml.as_bytes()),
            config: config_toml,
            artifacts: Vec::new(),
        }
    }

    /// Hashes `path` and records it relative to `root`.
    pub fn record(&mut self, root: &Path, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.artifacts.push(ArtifactRecord {
            path: rel.to_string_lossy().into_owned(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let header = vec!["a".to_string(), "b".to_string()];
        let p = write_csv(dir.path().join("t.csv"), &header, [["1", "2"], ["3", "4"]]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,2\n3,4\n");
        let mut m = Manifest::new("evaluate", 7, "seed = 7\n".into());
        m.record(dir.path(), &p).unwrap();
        assert_eq!(m.artifacts[0].path, "t.csv");
        let mp = dir.path().join("manifest.json");
        m.write(&mp).unwrap();
        let back: Manifest = serde_json::from_str(&std::fs::read_to_string(mp).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
