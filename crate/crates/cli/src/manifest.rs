//! Output directory handling and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

/// Collects the CSV files written by one run.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes one file through `body` and registers it for the manifest.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.root.join(name);
        let io_err = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Everything recorded about a run.
#[derive(Debug)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub claim: &'a str,
    pub config: &'a BTreeMap<String, String>,
    pub passed: bool,
    pub checks: &'a [String],
    pub wall_clock_seconds: f64,
}

impl Manifest<'_> {
    /// Writes `manifest.txt` with a sha256 line per output file.
    pub fn write(&self, out: &OutputDir) -> Result<PathBuf, CliError> {
        let mut text = String::new();
        text.push_str(&format!("experiment = {}\n", self.experiment));
        text.push_str(&format!("claim = {}\n", self.claim));
        text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!(
            "result = {}\n",
            if self.passed { "pass" } else { "fail" }
        ));
        text.push_str(&format!(
            "wall_clock_seconds = {:.3}\n",
            self.wall_clock_seconds
        ));
        text.push_str("\n[config]\n");
        for (k, v) in self.config {
            text.push_str(&format!("{k} = {v}\n"));
        }
        text.push_str("\n[checks]\n");
        for c in self.checks {
            text.push_str(c);
            text.push('\n');
        }
        text.push_str("\n[files]\n");
        for f in out.files() {
            text.push_str(&format!("{}  {f}\n", sha256_file(&out.root().join(f))?));
        }
        let path = out.root().join("manifest.txt");
        fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}
