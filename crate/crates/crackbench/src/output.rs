//! Output directories are filled in a hidden staging sibling and renamed into
//! place only when a command succeeds; a failed run leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Staging {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

impl Staging {
    /// Refuses targets that overlap any input, and non-empty targets unless
    /// `overwrite` is set.
    pub fn create(target: &Path, inputs: &[&Path], overwrite: bool) -> Result<Self> {
        let abs_target = absolute(target)?;
        for input in inputs {
            let abs_input = absolute(input)?;
            if abs_target.starts_with(&abs_input) || abs_input.starts_with(&abs_target) {
                return Err(Error::Usage(format!(
                    "output {} overlaps input {}; choose a separate directory",
                    target.display(),
                    input.display()
                )));
            }
        }
        if target.exists() {
            if !target.is_dir() {
                return Err(Error::Usage(format!("output {} exists and is not a directory", target.display())));
            }
            let non_empty = fs::read_dir(target).map_err(Error::io(target))?.next().is_some();
            if non_empty && !overwrite {
                return Err(Error::Usage(format!(
                    "output {} is not empty; pass --overwrite to replace it",
                    target.display()
                )));
            }
        }
        let name = abs_target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let parent = abs_target.parent().unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
        let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(Error::io(&staging))?;
        }
        fs::create_dir_all(&staging).map_err(Error::io(&staging))?;
        Ok(Self { target: abs_target, staging, committed: false })
    }

    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn join(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.staging.join(rel)
    }

    pub fn write(&self, rel: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.staging.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
        fs::write(&path, bytes).map_err(Error::io(&path))
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(Error::io(&self.target))?;
        }
        fs::rename(&self.staging, &self.target).map_err(Error::io(&self.target))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    // Canonicalize the longest existing prefix so symlinks and `..` compare
    // correctly for paths that do not exist yet.
    let abs = std::path::absolute(p).map_err(Error::io(p))?;
    let mut existing = abs.as_path();
    let mut rest = Vec::new();
    while !existing.exists() {
        match (existing.parent(), existing.file_name()) {
            (Some(parent), Some(name)) => {
                rest.push(name.to_owned());
                existing = parent;
            }
            _ => break,
        }
    }
    let mut out = existing.canonicalize().unwrap_or_else(|_| existing.to_path_buf());
    for part in rest.into_iter().rev() {
        out.push(part);
    }
    Ok(out)
}
