//! Result files: CSV tables, JSON reports and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// JSON report body with the config echoed next to it.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub artifact_version: &'static str,
    pub command: &'a str,
    pub config: ExperimentConfig,
    pub report: T,
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact_version: &'static str,
    command: &'a str,
    seed: u64,
    started_at: String,
    finished_at: String,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
}

/// Output directory that remembers what was written into it.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> CliResult<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.root.join(name);
        let csv_err = |e: csv::Error| CliError::io(&path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.record(name);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(self.root.join(name), e.into()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.record(name);
        Ok(path)
    }

    /// Written last, through a temporary file and a rename.
    pub fn write_manifest(&self, command: &str, config: &ExperimentConfig, started: DateTime<Utc>) -> CliResult<PathBuf> {
        let m = Manifest {
            artifact_version: ARTIFACT_VERSION,
            command,
            seed: config.seed,
            started_at: started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            config,
            outputs: self.files.clone(),
        };
        let path = self.root.join(MANIFEST_NAME);
        let tmp = self.root.join(format!(".{MANIFEST_NAME}.tmp"));
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| CliError::io(&path, e.into()))?;
        text.push('\n');
        fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
