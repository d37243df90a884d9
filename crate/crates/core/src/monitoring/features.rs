//! Feature registry and the sample × environment feature builder.
//!
//! The standard registry has 31 columns in a fixed order: 11 values at
//! measurement time, cumulative precipitation and cumulative GHI over the
//! eight antecedent windows, and GHI at four hourly lags.

use std::collections::BTreeMap;

use chrono::Duration;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, HourlySeries, SampleRecord};
use crate::matrix::FeatureMatrix;

/// Environmental series by variable name.
pub type EnvSeries = BTreeMap<String, HourlySeries>;

/// Series names the standard registry reads.
pub const STANDARD_SERIES: [&str; 9] = [
    "water_level",
    "ghi",
    "dewpoint",
    "precipitable_water",
    "rel_humidity",
    "surface_pressure",
    "wind_speed",
    "wind_direction",
    "precipitation",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntecedentWindowSpec {
    /// Cumulative window lengths in hours.
    pub cumulative_hours: Vec<u32>,
    /// Lag offsets in hours.
    pub lag_hours: Vec<u32>,
}

impl Default for AntecedentWindowSpec {
    fn default() -> Self {
        Self {
            cumulative_hours: vec![4, 2 * 24, 3 * 24, 4 * 24, 7 * 24, 14 * 24, 30 * 24, 60 * 24],
            lag_hours: vec![1, 2, 3, 4],
        }
    }
}

impl AntecedentWindowSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, list) in [("cumulative", &self.cumulative_hours), ("lag", &self.lag_hours)] {
            if list.contains(&0) {
                return Err(DataError::WindowSpec(format!("{name} durations must be positive")));
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(DataError::WindowSpec(format!("{name} durations must be strictly increasing")));
            }
        }
        Ok(())
    }
}

/// In-situ fields carried on the sample itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleField {
    AirTemp,
    Salinity,
    SeaTemp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSource {
    Sample { field: SampleField },
    /// Linear interpolation at measurement time.
    Instant { series: String },
    /// Shorter-arc interpolation of a direction in degrees.
    InstantAngle { series: String },
    Cumulative { series: String, hours: u32 },
    Lag { series: String, hours: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub source: FeatureSource,
}

/// Ordered column definitions; serialized as the column-registry manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    pub columns: Vec<FeatureColumn>,
}

fn window_label(hours: u32) -> String {
    if hours.is_multiple_of(24) {
        format!("{}d", hours / 24)
    } else {
        format!("{hours}h")
    }
}

impl FeatureRegistry {
    pub fn standard() -> Self {
        Self::with_windows(&AntecedentWindowSpec::default())
    }

    pub fn with_windows(spec: &AntecedentWindowSpec) -> Self {
        let col = |name: &str, source: FeatureSource| FeatureColumn { name: name.to_string(), source };
        let instant = |s: &str| FeatureSource::Instant { series: s.to_string() };
        let mut columns = vec![
            col("air_temp", FeatureSource::Sample { field: SampleField::AirTemp }),
            col("salinity", FeatureSource::Sample { field: SampleField::Salinity }),
            col("sea_temp", FeatureSource::Sample { field: SampleField::SeaTemp }),
            col("water_level", instant("water_level")),
            col("ghi", instant("ghi")),
            col("dewpoint", instant("dewpoint")),
            col("precipitable_water", instant("precipitable_water")),
            col("rel_humidity", instant("rel_humidity")),
            col("surface_pressure", instant("surface_pressure")),
            col("wind_speed", instant("wind_speed")),
            col("wind_direction", FeatureSource::InstantAngle { series: "wind_direction".into() }),
        ];
        for (prefix, series) in [("cprec", "precipitation"), ("cghi", "ghi")] {
            for &h in &spec.cumulative_hours {
                columns.push(col(
                    &format!("{prefix}_{}", window_label(h)),
                    FeatureSource::Cumulative { series: series.into(), hours: h },
                ));
            }
        }
        for &h in &spec.lag_hours {
            columns.push(col(&format!("ghi_lag{h}"), FeatureSource::Lag { series: "ghi".into(), hours: h }));
        }
        Self { columns }
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::WindowSpec(format!("duplicate column `{}`", c.name)));
            }
            if let FeatureSource::Cumulative { hours: 0, .. } = c.source {
                return Err(DataError::WindowSpec(format!("column `{}` has a zero-length window", c.name)));
            }
        }
        Ok(())
    }

    /// Series this registry needs.
    pub fn required_series(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .columns
            .iter()
            .filter_map(|c| match &c.source {
                FeatureSource::Sample { .. } => None,
                FeatureSource::Instant { series }
                | FeatureSource::InstantAngle { series }
                | FeatureSource::Cumulative { series, .. }
                | FeatureSource::Lag { series, .. } => Some(series.as_str()),
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn lookup<'a>(env: &'a EnvSeries, name: &str) -> Result<&'a HourlySeries, DataError> {
    env.get(name).ok_or_else(|| DataError::MissingSeries(name.to_string()))
}

fn feature_value(sample: &SampleRecord, env: &EnvSeries, source: &FeatureSource) -> Result<f64, DataError> {
    let t = sample.timestamp;
    match source {
        FeatureSource::Sample { field } => Ok(match field {
            SampleField::AirTemp => sample.air_temp,
            SampleField::Salinity => sample.salinity,
            SampleField::SeaTemp => sample.sea_temp,
        }),
        FeatureSource::Instant { series } => lookup(env, series)?.interp_at(t),
        FeatureSource::InstantAngle { series } => lookup(env, series)?.interp_angle_at(t),
        FeatureSource::Cumulative { series, hours } => {
            lookup(env, series)?.cumulative_window(t, Duration::hours(i64::from(*hours)))
        }
        FeatureSource::Lag { series, hours } => lookup(env, series)?.lagged_value(t, Duration::hours(i64::from(*hours))),
    }
}

/// One feature row per sample, in registry order. Fails on the first sample
/// whose required span is not covered, naming the sample and the feature.
pub fn build_features(samples: &[SampleRecord], env: &EnvSeries, registry: &FeatureRegistry) -> Result<FeatureMatrix, DataError> {
    registry.validate()?;
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            registry
                .columns
                .iter()
                .map(|c| {
                    feature_value(s, env, &c.source).map_err(|e| DataError::Feature {
                        index: i,
                        site: s.site_id.clone(),
                        timestamp: s.timestamp.format("%Y-%m-%dT%H:%M").to_string(),
                        feature: c.name.clone(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_, _>>()?;
    FeatureMatrix::new(registry.names(), rows).map_err(|e| DataError::Domain(e.to_string()))
}
