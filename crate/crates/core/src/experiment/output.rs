use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "CGI_OUT_DIR";

/// Output directory: an explicit choice wins, then [`OUTPUT_DIR_ENV`], then the configured one.
pub fn resolve_output_dir(explicit: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => configured.to_path_buf(),
    }
}

/// Collects a run's files in a hidden staging directory and moves them into the
/// output directory only on [`OutputStage::commit`]. Dropping an uncommitted
/// stage removes everything it wrote.
#[derive(Debug)]
pub struct OutputStage {
    target: PathBuf,
    staging: PathBuf,
    names: Vec<String>,
    committed: bool,
}

impl OutputStage {
    pub fn new(target: &Path) -> Result<Self> {
        fs::create_dir_all(target)?;
        let staging = target.join(format!(".staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        Ok(OutputStage {
            target: target.to_path_buf(),
            staging,
            names: Vec::new(),
            committed: false,
        })
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    /// Final location of `name` once committed.
    pub fn final_path(&self, name: &str) -> PathBuf {
        self.target.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if name.contains(['/', '\\']) || name.starts_with('.') || name.is_empty() {
            return Err(Error::invalid(format!("bad output file name `{name}`")));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::invalid(format!("output `{name}` written twice")));
        }
        fs::write(self.staging.join(name), bytes)?;
        self.names.push(name.to_string());
        Ok(self.final_path(name))
    }

    /// Moves every staged file into the output directory, in write order.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let dest = self.target.join(name);
            fs::rename(self.staging.join(name), &dest)?;
            out.push(dest);
        }
        fs::remove_dir_all(&self.staging)?;
        self.committed = true;
        Ok(out)
    }
}

impl Drop for OutputStage {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
