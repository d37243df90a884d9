//! Monitoring samples, hourly environmental series, and the engineered
//! feature matrix built from them.

mod features;
mod quality;
mod samples;
mod series;

pub use features::{
    build_features, AntecedentWindowSpec, EnvSeries, FeatureColumn, FeatureRegistry, FeatureSource, SampleField,
    STANDARD_SERIES,
};
pub use quality::{classify_quality, QualityClass};
pub use samples::{parse_samples, write_samples, ColumnMap, RowError, SampleRecord, SampleSchema, SampleTable, SeasonWindow};
pub use series::HourlySeries;

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file} line {line}: {message}")]
    Row { file: String, line: u64, message: String },
    #[error("{file}: {message}")]
    Csv { file: String, message: String },
    #[error("series `{series}`: {message}")]
    Series { series: String, message: String },
    #[error("series `{series}`: gap between {from} and {to} exceeds one hour")]
    Gap { series: String, from: String, to: String },
    #[error("series `{series}`: no coverage for span {from} .. {to}")]
    OutOfRange { series: String, from: String, to: String },
    #[error("sample {index} ({site} @ {timestamp}), feature `{feature}`: {source}")]
    Feature {
        index: usize,
        site: String,
        timestamp: String,
        feature: String,
        #[source]
        source: Box<DataError>,
    },
    #[error("environmental series `{0}` not provided")]
    MissingSeries(String),
    #[error("invalid window spec: {0}")]
    WindowSpec(String),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn csv(file: &str, e: csv::Error) -> Self {
        DataError::Csv { file: file.to_string(), message: e.to_string() }
    }
}

/// Parse an ISO-8601 timestamp. Strings carrying an explicit offset are
/// honored; naive strings are read as local time at `utc_offset_minutes`.
pub fn parse_timestamp(s: &str, utc_offset_minutes: i32) -> Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    let naive = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| format!("timestamp `{s}` is not ISO-8601"))?;
    let offset = FixedOffset::east_opt(utc_offset_minutes * 60).ok_or_else(|| format!("bad UTC offset {utc_offset_minutes} min"))?;
    offset
        .from_local_datetime(&naive)
        .single()
        .map(|t| t.with_timezone(&Utc))
        .ok_or_else(|| format!("timestamp `{s}` is ambiguous"))
}
