//! Staged output. Files are written under a hidden staging directory inside
//! `--out` and renamed into place only when the command succeeds, so a
//! failing command leaves no partial files behind.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

/// Bad flag combinations detected after parsing. Exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug)]
pub struct Output {
    dir: Option<PathBuf>,
    staging: Option<PathBuf>,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: Option<&Path>) -> Self {
        Self { dir: dir.map(Path::to_path_buf), staging: None, files: Vec::new() }
    }

    pub fn is_enabled(&self) -> bool {
        self.dir.is_some()
    }

    pub fn require(&self, command: &str) -> Result<()> {
        if self.dir.is_none() {
            return Err(usage(format!("{command} requires --out")));
        }
        Ok(())
    }

    /// Creates (once) and returns the staging directory.
    pub fn staging_dir(&mut self) -> Result<PathBuf> {
        if let Some(staging) = &self.staging {
            return Ok(staging.clone());
        }
        let dir = self.dir.as_ref().ok_or_else(|| usage("this command needs --out"))?;
        let staging = dir.join(format!(".staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).with_context(|| format!("clearing {}", staging.display()))?;
        }
        fs::create_dir_all(&staging).with_context(|| format!("creating {}", staging.display()))?;
        self.staging = Some(staging.clone());
        Ok(staging)
    }

    /// Stages `name` when `--out` is set; otherwise does nothing.
    pub fn file(&mut self, name: &str, contents: &str) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let path = self.staging_dir()?.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.track(name);
        Ok(())
    }

    /// Records a file that was placed in the staging directory directly.
    pub fn track(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_owned());
        }
    }

    /// Stages `<command>.run.json` with the effective configuration and the
    /// list of produced files.
    pub fn run_record(&mut self, command: &str, effective: Value) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let mut files = self.files.clone();
        files.sort();
        let record = serde_json::json!({
            "command": command,
            "effective_config": effective,
            "outputs": files,
            "version": env!("CARGO_PKG_VERSION"),
        });
        let mut text = serde_json::to_string_pretty(&record)?;
        text.push('\n');
        self.file(&format!("{command}.run.json"), &text)
    }

    /// Moves every staged file into `--out`.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let (Some(dir), Some(staging)) = (self.dir.clone(), self.staging.take()) else {
            return Ok(Vec::new());
        };
        let mut placed = Vec::new();
        for name in &self.files {
            let target = dir.join(name);
            fs::rename(staging.join(name), &target).with_context(|| format!("moving {} into place", target.display()))?;
            placed.push(target);
        }
        fs::remove_dir_all(&staging).with_context(|| format!("removing {}", staging.display()))?;
        Ok(placed)
    }
}

impl Drop for Output {
    fn drop(&mut self) {
        if let Some(staging) = self.staging.take() {
            let _ = fs::remove_dir_all(staging);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_moves_files_and_drop_discards() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::new(Some(dir.path()));
        out.file("a.txt", "x").unwrap();
        out.run_record("demo", serde_json::json!({"k": 1})).unwrap();
        let placed = out.commit().unwrap();
        assert_eq!(placed.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("a.txt")).unwrap(), "x");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);

        let mut failed = Output::new(Some(dir.path()));
        failed.file("b.txt", "y").unwrap();
        drop(failed);
        assert!(!dir.path().join("b.txt").exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn disabled_output_writes_nothing() {
        let mut out = Output::new(None);
        out.file("a.txt", "x").unwrap();
        assert!(out.commit().unwrap().is_empty());
        assert!(Output::new(None).require("pack").is_err());
    }
}
