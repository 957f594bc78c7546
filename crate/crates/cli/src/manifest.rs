//! Run manifests and atomic artifact directories.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use mars_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use crate::config::Config;

pub const MANIFEST: &str = "manifest.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the artifact directory that lists it.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    /// Artifact directory the file was read from.
    pub dir: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<FileRecord>,
    pub config: Config,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<RunManifest> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| {
            std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| Error::format("run manifest", format!("{}: {}", path.display(), e.message())))
    }

    /// Re-hashes `files` (relative to `dir`) against the manifest in `dir`
    /// and returns them as input records.
    pub fn verify(dir: &Path, files: &[&str]) -> Result<Vec<InputRecord>> {
        let manifest = RunManifest::read(dir)?;
        files
            .iter()
            .map(|&name| {
                let rec = manifest.outputs.iter().find(|r| r.path == name).ok_or_else(|| {
                    Error::format("run manifest", format!("{} does not list {name}", dir.display()))
                })?;
                let actual = sha256_file(&dir.join(name))?;
                if actual != rec.sha256 {
                    return Err(Error::invalid(format!(
                        "{} does not match its manifest hash",
                        dir.join(name).display()
                    )));
                }
                Ok(InputRecord {
                    dir: dir.display().to_string(),
                    path: name.to_string(),
                    sha256: actual,
                })
            })
            .collect()
    }
}

/// An output directory assembled in a sibling temporary directory and moved
/// into place only when complete.
pub struct Staging {
    tmp: TempDir,
    target: PathBuf,
    overwrite: bool,
}

impl Staging {
    pub fn new(target: &Path, overwrite: bool) -> Result<Staging> {
        if target.exists() && !overwrite {
            return Err(Error::invalid(format!(
                "{} already exists; pass --overwrite to replace it",
                target.display()
            )));
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let tmp = tempfile::Builder::new().prefix(".mars-staging-").tempdir_in(&parent)?;
        Ok(Staging {
            tmp,
            target: target.to_path_buf(),
            overwrite,
        })
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    /// Hashes every staged file, writes the manifest and moves the directory
    /// into place.
    pub fn commit(self, command: &str, config: &Config, inputs: Vec<InputRecord>) -> Result<PathBuf> {
        let mut outputs = Vec::new();
        collect_files(self.tmp.path(), self.tmp.path(), &mut outputs)?;
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            inputs,
            outputs,
            config: config.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::format("run manifest", e.to_string()))?;
        fs::write(self.tmp.path().join(MANIFEST), text)?;
        if self.target.exists() {
            if !self.overwrite {
                return Err(Error::invalid(format!("{} appeared while running", self.target.display())));
            }
            if self.target.is_dir() {
                fs::remove_dir_all(&self.target)?;
            } else {
                fs::remove_file(&self.target)?;
            }
        }
        let staged = self.tmp.keep();
        if let Err(e) = fs::rename(&staged, &self.target) {
            let _ = fs::remove_dir_all(&staged);
            return Err(e.into());
        }
        Ok(self.target)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<FileRecord>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("file lies under root");
            out.push(FileRecord {
                path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                sha256: sha256_file(&path)?,
            });
        }
    }
    Ok(())
}
