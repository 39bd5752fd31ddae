use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use indexmap::IndexMap;
use serde::Serialize;

use sarcrop::{Error, Result};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub outputs: Vec<PathBuf>,
    /// Wall-clock seconds per stage.
    pub timings: IndexMap<String, f64>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            version: format!("sarcrop {}", env!("CARGO_PKG_VERSION")),
            config: config.clone(),
            seeds: config.seed_list(),
            outputs: Vec::new(),
            timings: IndexMap::new(),
            clock: None,
        }
    }

    /// Starts timing `stage`, closing the previous one.
    pub fn stage(&mut self, stage: &str) {
        self.stop();
        self.clock = Some((stage.to_string(), Instant::now()));
    }

    pub fn stop(&mut self) {
        if let Some((name, t)) = self.clock.take() {
            *self.timings.entry(name).or_insert(0.0) += t.elapsed().as_secs_f64();
        }
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Checks every listed output exists, then writes the manifest into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.stop();
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(Error::Data(format!("declared output {} was not written", missing.display())));
        }
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, &self)?;
        Ok(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Prints progress lines and mirrors them into a log file.
pub struct RunLog {
    path: PathBuf,
    file: File,
}

impl RunLog {
    pub fn to_file(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn line(&mut self, msg: impl AsRef<str>) -> Result<()> {
        let msg = msg.as_ref();
        println!("{msg}");
        writeln!(self.file, "{msg}").map_err(|e| Error::io(&self.path, e))
    }
}
