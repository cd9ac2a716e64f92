//! Run directories: a lock held for the life of a command, a manifest of
//! inputs and seeds, and writers that refuse paths leaving the directory.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sinusbench::hash::sha256_hex;

use crate::error::{CliError, Result};

pub const LOCK_FILE: &str = "run.lock";
pub const MANIFEST_FILE: &str = "manifest.json";

/// An open run directory. The lock file is removed when this is dropped.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates the directory if needed and takes its lock. A second process
    /// (or a stale lock) makes this fail rather than share the directory.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let lock = root.join(LOCK_FILE);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => CliError::validation(format!(
                    "{} is locked by another process; remove {} if it is stale",
                    root.display(),
                    lock.display()
                )),
                _ => e.into(),
            })
            .and_then(|mut f| {
                use std::io::Write;
                writeln!(f, "{}", std::process::id())?;
                Ok(())
            })?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path of `relative` inside the run directory. Rejects
    /// absolute paths and `..` components.
    pub fn path(&self, relative: impl AsRef<Path>) -> Result<PathBuf> {
        let relative = relative.as_ref();
        let inside = relative
            .components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
        if !inside || relative.as_os_str().is_empty() {
            return Err(CliError::validation(format!(
                "{} would leave the run directory",
                relative.display()
            )));
        }
        Ok(self.root.join(relative))
    }

    pub fn exists(&self, relative: impl AsRef<Path>) -> bool {
        self.path(relative).map(|p| p.exists()).unwrap_or(false)
    }

    pub fn write(&self, relative: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(relative)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, relative: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(relative, text)
    }

    pub fn read_json<T: for<'de> Deserialize<'de>>(&self, relative: impl AsRef<Path>) -> Result<T> {
        let path = self.path(relative)?;
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    /// Removes `relative` if present, so appending writers start clean.
    pub fn remove(&self, relative: impl AsRef<Path>) -> Result<()> {
        let path = self.path(relative)?;
        if path.is_dir() {
            fs::remove_dir_all(path)?;
        } else if path.exists() {
            fs::remove_file(path)?;
        }
        Ok(())
    }

    pub fn manifest(&self) -> Result<Manifest> {
        if self.exists(MANIFEST_FILE) {
            self.read_json(MANIFEST_FILE)
        } else {
            Ok(Manifest::new(
                self.root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            ))
        }
    }

    /// Loads the manifest, lets `f` amend it and writes it back.
    pub fn update_manifest(&self, f: impl FnOnce(&mut Manifest) -> Result<()>) -> Result<()> {
        let mut manifest = self.manifest()?;
        f(&mut manifest)?;
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_FILE));
    }
}

/// Everything needed to re-execute a run: input checksums, the schema
/// checksum, seeds and component versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub versions: BTreeMap<String, String>,
    pub schema_checksum: Option<String>,
    /// Input path to SHA-256 of its bytes (directories hash their sorted
    /// file listing and contents).
    pub inputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Commands applied to this directory, in order.
    pub stages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(run_id: String) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("sinusbench".into(), sinusbench::VERSION.into());
        versions.insert("sinusbench-cli".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("audit_format".into(), sinusbench::protocol::AUDIT_FORMAT.into());
        Manifest {
            run_id,
            versions,
            schema_checksum: None,
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            stages: Vec::new(),
            config: None,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let digest = checksum_path(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn record_stage(&mut self, stage: impl Into<String>) {
        self.stages.push(stage.into());
    }
}

/// SHA-256 of a file, or of a directory's files in sorted order (each
/// relative name followed by its digest).
pub fn checksum_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files)?;
        files.sort();
        let mut listing = String::new();
        for rel in files {
            let digest = sha256_hex(&fs::read(path.join(&rel))?);
            listing.push_str(&format!("{rel}\t{digest}\n"));
        }
        Ok(sha256_hex(listing.as_bytes()))
    } else {
        let bytes = fs::read(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Ok(sha256_hex(&bytes))
    }
}

fn collect_files(base: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(base, &path, out)?;
        } else {
            let rel = path.strip_prefix(base).expect("under base");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}
