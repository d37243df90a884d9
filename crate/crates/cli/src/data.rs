use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use fibpred_core::evaluation::Dataset;
use fibpred_core::matrix::FeatureMatrix;
use fibpred_core::monitoring::{
    build_features, parse_samples, parse_timestamp, EnvSeries, FeatureRegistry, HourlySeries, SampleRecord, SampleSchema,
};
use fibpred_core::preprocess::log10p;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Target};
use crate::error::CliError;

pub const FEATURES_FILE: &str = "features.csv";
pub const TARGETS_FILE: &str = "targets.csv";
pub const FEATURES_MANIFEST: &str = "features_manifest.json";

/// Row labels kept next to the feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    pub site: String,
    pub timestamp: DateTime<Utc>,
    pub ec: u32,
    pub ent: u32,
}

impl From<&SampleRecord> for RowMeta {
    fn from(s: &SampleRecord) -> Self {
        Self { site: s.site_id.clone(), timestamp: s.timestamp, ec: s.ec, ent: s.ent }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub x: FeatureMatrix,
    pub rows: Vec<RowMeta>,
}

impl Table {
    pub fn dataset(&self, target: Target) -> Result<Dataset, CliError> {
        let y = self
            .rows
            .iter()
            .map(|r| log10p(i64::from(if target == Target::Ec { r.ec } else { r.ent })))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset::new(
            self.x.clone(),
            y,
            self.rows.iter().map(|r| r.site.clone()).collect(),
            self.rows.iter().map(|r| r.timestamp).collect(),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesManifest {
    pub n_rows: usize,
    pub columns: Vec<String>,
    pub registry: FeatureRegistry,
    pub rejected_rows: usize,
}

fn required(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.clone().ok_or_else(|| CliError::input(format!("no {what} given (set data.{what} or pass --{})", what.replace('_', "-"))))
}

pub fn read_samples(cfg: &RunConfig) -> Result<(Vec<SampleRecord>, usize), CliError> {
    let path = required(&cfg.data.samples, "samples")?;
    let schema = SampleSchema { utc_offset_minutes: cfg.data.utc_offset_minutes, ..SampleSchema::default() };
    let table = parse_samples(&path, &schema)?;
    if !table.rejected.is_empty() {
        for r in table.rejected.iter().take(20) {
            log::warn!("{} line {}: {}", path.display(), r.line, r.message);
        }
        if !cfg.data.skip_invalid {
            let first = &table.rejected[0];
            return Err(CliError::input(format!(
                "{}: {} invalid row(s); first at line {}: {}",
                path.display(),
                table.rejected.len(),
                first.line,
                first.message
            )));
        }
    }
    if table.records.is_empty() {
        return Err(CliError::input(format!("{}: no samples", path.display())));
    }
    Ok((table.records, table.rejected.len()))
}

pub fn read_env(dir: &Path, registry: &FeatureRegistry, utc_offset_minutes: i32) -> Result<EnvSeries, CliError> {
    let mut env = EnvSeries::new();
    for name in registry.required_series() {
        let path = dir.join(format!("{name}.csv"));
        if !path.exists() {
            return Err(CliError::input(format!("environmental series `{name}` not found at {}", path.display())));
        }
        env.insert(name.to_string(), HourlySeries::read_csv_file(name, &path, utc_offset_minutes)?);
    }
    Ok(env)
}

/// Build the feature table from samples and env series.
pub fn build_table(cfg: &RunConfig) -> Result<(Table, FeaturesManifest), CliError> {
    let registry = cfg.features.registry()?;
    let (samples, rejected) = read_samples(cfg)?;
    let env = read_env(&required(&cfg.data.env_dir, "env_dir")?, &registry, cfg.data.utc_offset_minutes)?;
    let x = build_features(&samples, &env, &registry)?;
    let manifest = FeaturesManifest { n_rows: x.n_rows(), columns: x.columns().to_vec(), registry, rejected_rows: rejected };
    Ok((Table { x, rows: samples.iter().map(RowMeta::from).collect() }, manifest))
}

/// The table a command trains or evaluates on: a features directory when
/// configured, otherwise built from samples + env.
pub fn load_table(cfg: &RunConfig) -> Result<Table, CliError> {
    match &cfg.data.features_dir {
        Some(dir) => read_table(dir),
        None => Ok(build_table(cfg)?.0),
    }
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let x = FeatureMatrix::read_csv(std::io::BufReader::new(f)).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if x.is_empty() {
        return Err(CliError::input(format!("{}: matrix has no rows", path.display())));
    }
    Ok(x)
}

pub fn read_table(dir: &Path) -> Result<Table, CliError> {
    let x = read_matrix(&dir.join(FEATURES_FILE))?;
    let path = dir.join(TARGETS_FILE);
    let mut r = csv::Reader::from_path(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| CliError::input(format!("{} line {}: bad {what}", path.display(), rows.len() + 2));
        let count = |i: usize, what: &str| rec.get(i).and_then(|v| v.parse::<u32>().ok()).ok_or_else(|| bad(what));
        rows.push(RowMeta {
            site: rec.get(0).filter(|s| !s.is_empty()).ok_or_else(|| bad("site"))?.to_string(),
            timestamp: rec.get(1).and_then(|t| parse_timestamp(t, 0).ok()).ok_or_else(|| bad("timestamp"))?,
            ec: count(2, "ec")?,
            ent: count(3, "ent")?,
        });
    }
    if rows.len() != x.n_rows() {
        return Err(CliError::input(format!("{} has {} rows, {} has {}", FEATURES_FILE, x.n_rows(), TARGETS_FILE, rows.len())));
    }
    Ok(Table { x, rows })
}

pub fn write_targets<W: Write>(mut out: W, rows: &[RowMeta]) -> std::io::Result<()> {
    writeln!(out, "site,timestamp,ec,ent")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.site, r.timestamp.format("%Y-%m-%dT%H:%M:%SZ"), r.ec, r.ent)?;
    }
    Ok(())
}
