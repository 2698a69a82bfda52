//! Output files: headered CSV, JSON summaries and a manifest per run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Shortest round-trip form, so identical runs give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Run {
    dir: PathBuf,
    stem: String,
    files: Vec<String>,
}

impl Run {
    pub fn new(dir: &Path, stem: impl Into<String>) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), stem: stem.into(), files: Vec::new() })
    }

    fn path(&mut self, ext: &str) -> PathBuf {
        let name = format!("{}.{ext}", self.stem);
        self.files.push(name.clone());
        self.dir.join(name)
    }

    pub fn csv(&mut self, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path("csv")).map_err(|e| CliError::Io(e.into()))?;
        w.write_record(header).map_err(|e| CliError::Io(e.into()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the summary and prints it on stdout.
    pub fn json(&mut self, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
        fs::write(self.path("json"), format!("{text}\n"))?;
        // a closed stdout must not cost the manifest
        let _ = writeln!(std::io::stdout().lock(), "{text}");
        Ok(())
    }

    pub fn finish(mut self, config: &impl Serialize) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            program: &'static str,
            version: &'static str,
            cache_dir: String,
            config: &'a C,
            outputs: Vec<String>,
        }
        let outputs = self.files.clone();
        let m = Manifest {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            cache_dir: pxp_core::series::cache_dir().display().to_string(),
            config,
            outputs,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.into()))?;
        let path = self.path("manifest.json");
        fs::write(path, format!("{text}\n"))?;
        Ok(())
    }
}
