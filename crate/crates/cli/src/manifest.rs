//! Output directory bookkeeping: every emitted file is hashed into `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files into one directory and remembers their hashes.
pub struct Emitter {
    dir: PathBuf,
    written: BTreeMap<String, ManifestEntry>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Emitter { dir: dir.to_path_buf(), written: BTreeMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let bytes = contents.as_ref();
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        let entry = ManifestEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 };
        self.written.insert(name.to_string(), entry);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(np_spectra_core::Error::from)? + "\n";
        self.write(name, text)
    }

    /// Writes the manifest, then re-reads every listed file to confirm it.
    pub fn finish(self) -> Result<Vec<String>> {
        let manifest = Manifest { files: self.written.into_values().collect() };
        let names = manifest.files.iter().map(|f| f.path.clone()).collect();
        let text = serde_json::to_string_pretty(&manifest).map_err(np_spectra_core::Error::from)? + "\n";
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        check(&self.dir)?;
        Ok(names)
    }
}

/// Confirms that every file listed in `dir/manifest.json` still has its recorded hash.
pub fn check(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(np_spectra_core::Error::from)?;
    for f in &manifest.files {
        let p = dir.join(&f.path);
        let bytes = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
            return Err(CliError::Manifest(f.path.clone()));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_is_sorted_and_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut em = Emitter::new(dir.path()).unwrap();
        em.write("b.csv", "1\n").unwrap();
        em.write("a.json", "{}\n").unwrap();
        assert_eq!(em.finish().unwrap(), vec!["a.json", "b.csv"]);
        assert_eq!(check(dir.path()).unwrap().files.len(), 2);
        std::fs::write(dir.path().join("b.csv"), "2\n").unwrap();
        assert!(matches!(check(dir.path()), Err(CliError::Manifest(p)) if p == "b.csv"));
    }
}
