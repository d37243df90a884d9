use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::error::CliError;

/// Wall-clock data for one command run. The only non-deterministic file in an output directory.
pub const RUN_META_FILE: &str = "run_meta.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";

pub struct Out {
    dir: PathBuf,
}

impl Out {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write through a buffered file; returns the path.
    pub fn write_with<F>(&self, name: &str, f: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let err = |e: std::io::Error| CliError::internal(format!("{}: {e}", path.display()));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(err)?);
        f(&mut w).and_then(|_| w.flush()).map_err(err)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }

    pub fn write_config(&self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let mut c = cfg.clone();
        c.out = None;
        c.threads = None;
        self.write_json(RESOLVED_CONFIG_FILE, &c)
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Named phase timings plus start/end stamps.
pub struct Clock {
    command: &'static str,
    started: chrono::DateTime<Utc>,
    start: Instant,
    last: Instant,
    phases: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    started_at: String,
    finished_at: String,
    threads: usize,
    elapsed_ms: f64,
    phases_ms: &'a BTreeMap<String, f64>,
}

impl Clock {
    pub fn start(command: &'static str) -> Self {
        let now = Instant::now();
        Self { command, started: Utc::now(), start: now, last: now, phases: BTreeMap::new() }
    }

    pub fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        *self.phases.entry(phase.to_string()).or_default() += (now - self.last).as_secs_f64() * 1e3;
        self.last = now;
    }

    pub fn finish(self, out: &Out, cfg: &RunConfig) -> Result<(), CliError> {
        let meta = RunMeta {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: cfg.hash(),
            started_at: self.started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            threads: rayon::current_num_threads(),
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
            phases_ms: &self.phases,
        };
        out.write_json(RUN_META_FILE, &meta).map(|_| ())
    }
}
