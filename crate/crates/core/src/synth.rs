//! Synthetic monitoring cluster with a known generating function.
//!
//! Sites are ordered east to west. One set of hourly environmental series
//! serves the whole cluster; salinity, temperatures and counts are drawn per
//! site. The log-count signal is a sum of standardized driver terms:
//!
//! ```text
//! η = β₀(site) + β_S·z(hinge(S)) + exposure(site)·(−β_G·z(ghi_lag1) + β_P·z(cprec_2d) [+ β_W·z(cos(wd − 135°))])
//! hinge(S) = max(0, knee − S) − above_ratio·max(0, S − knee)
//! ```
//!
//! `z` standardizes each driver by fixed nominal moments, so `|β|` orders the
//! terms. Counts are `round(10^(η + ε) − 1)` clamped at zero, with a fixed
//! per-sample probability of being replaced by zero.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitoring::{write_samples, DataError, EnvSeries, HourlySeries, SampleRecord, STANDARD_SERIES};
use crate::preprocess::inv_log10p;
use crate::tree::derive_seed;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which count a generating term feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    Ec,
    Ent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthBetas {
    /// β₀ at the easternmost site, log10 scale.
    pub intercept_ec: f64,
    pub intercept_ent: f64,
    /// Drop of β₀ from the easternmost to the westernmost site, scaled by `site_gradient`.
    pub site_drop: f64,
    pub salinity: f64,
    /// Slope above the knee relative to the slope below it.
    pub salinity_above_ratio: f64,
    pub ghi: f64,
    pub precipitation: f64,
    /// ENT only.
    pub wind: f64,
    /// Multiplier applied to the shared terms for ENT.
    pub ent_share: f64,
}

impl Default for TruthBetas {
    fn default() -> Self {
        Self {
            intercept_ec: 0.5,
            intercept_ent: 0.45,
            site_drop: 0.0,
            salinity: 1.0,
            salinity_above_ratio: 0.85,
            ghi: 0.25,
            precipitation: 0.2,
            wind: 0.3,
            ent_share: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_sites: usize,
    pub seasons: Vec<i32>,
    pub samples_per_season_per_site: usize,
    pub sample_interval_days: u32,
    /// 0 removes every east-west difference, 1 is the default cluster.
    pub site_gradient: f64,
    /// Gaussian noise on the log10 scale.
    pub noise_sigma: f64,
    pub salinity_knee: f64,
    pub zero_prob: f64,
    /// Site id → first sampled season, for sites that joined later.
    pub late_starts: BTreeMap<String, i32>,
    pub betas: TruthBetas,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_sites: 14,
            seasons: (2009..=2020).collect(),
            samples_per_season_per_site: 10,
            sample_interval_days: 15,
            site_gradient: 1.0,
            noise_sigma: 0.1,
            salinity_knee: 34.0,
            zero_prob: 0.15,
            late_starts: BTreeMap::from([(site_id(7), 2010)]),
            betas: TruthBetas::default(),
            seed: 2009,
        }
    }
}

/// First sampling day of each season (month, day).
const SEASON_OPEN: (u32, u32) = (5, 15);
/// Hourly series start this many days before the first season opens.
const ENV_LEAD_DAYS: i64 = 75;
const FRESHWATER_DECAY_HOURS: f64 = 48.0;
const WIND_ONSHORE_DEG: f64 = 135.0;

/// Nominal (mean, sd) of each driver under the default environment.
const MOMENTS_SALINITY: (f64, f64) = (-0.26, 1.04);
const MOMENTS_GHI: (f64, f64) = (214.0, 127.0);
const MOMENTS_PRECIP: (f64, f64) = (4.7, 13.2);
const MOMENTS_WIND: (f64, f64) = (0.0, std::f64::consts::FRAC_1_SQRT_2);

pub fn site_id(index: usize) -> String {
    format!("S{:02}", index + 1)
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.n_sites == 0 || self.samples_per_season_per_site == 0 || self.sample_interval_days == 0 {
            return bad("site, sample and interval counts must be positive".into());
        }
        if self.seasons.is_empty() {
            return bad("at least one season is required".into());
        }
        if self.seasons.windows(2).any(|w| w[1] <= w[0]) {
            return bad("seasons must be strictly increasing".into());
        }
        let span = (self.samples_per_season_per_site as u32 - 1) * self.sample_interval_days;
        // May 15 + span must stay within the bathing season (Sept 30) even with a 3-day start jitter.
        if span + 3 > 138 {
            return bad(format!(
                "{} samples every {} days do not fit in one bathing season",
                self.samples_per_season_per_site, self.sample_interval_days
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be a finite value >= 0, got {}", self.noise_sigma));
        }
        if !(0.0..=1.0).contains(&self.zero_prob) {
            return bad(format!("zero_prob must lie in [0, 1], got {}", self.zero_prob));
        }
        if !(0.0..=1.0).contains(&self.site_gradient) {
            return bad(format!("site_gradient must lie in [0, 1], got {}", self.site_gradient));
        }
        if !(0.0..=45.0).contains(&self.salinity_knee) {
            return bad(format!("salinity_knee {} outside [0, 45]", self.salinity_knee));
        }
        for (site, year) in &self.late_starts {
            if !(0..self.n_sites).any(|i| &site_id(i) == site) {
                return bad(format!("late start for unknown site `{site}`"));
            }
            if !self.seasons.contains(year) {
                return bad(format!("late start year {year} for `{site}` is not a configured season"));
            }
        }
        let b = &self.betas;
        let all = [
            b.intercept_ec,
            b.intercept_ent,
            b.site_drop,
            b.salinity,
            b.salinity_above_ratio,
            b.ghi,
            b.precipitation,
            b.wind,
            b.ent_share,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("betas must be finite".into());
        }
        Ok(())
    }
}

/// Per-site generating parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteTruth {
    pub site: String,
    /// 0 at the easternmost site, 1 at the westernmost.
    pub position: f64,
    pub beta0_ec: f64,
    pub beta0_ent: f64,
    /// Late-season salinity without rain.
    pub salinity_base: f64,
    /// Extra freshening at season open, fading linearly to zero by the end of September.
    pub spring_freshening: f64,
    /// Salinity drop under a saturated freshwater pulse.
    pub dip_amplitude: f64,
    /// Weight of the weather-driven terms at this site.
    pub exposure: f64,
}

/// One generating term: coefficient, driver feature and the nominal moments
/// used to standardize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTerm {
    pub feature: String,
    pub indicator: Indicator,
    /// Signed coefficient on the standardized driver.
    pub beta: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Noise-free signal and per-term contributions for one generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub eta_ec: f64,
    pub eta_ent: f64,
    /// Contributions in `terms` order.
    pub contributions: Vec<f64>,
    pub zero_ec: bool,
    pub zero_ent: bool,
}

/// Ground-truth manifest written next to the generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub config: SynthConfig,
    pub sites: Vec<SiteTruth>,
    pub terms: Vec<TruthTerm>,
    pub rows: Vec<TruthRow>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub samples: Vec<SampleRecord>,
    pub env: EnvSeries,
    pub truth: SynthTruth,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn hinge(s: f64, knee: f64, above_ratio: f64) -> f64 {
    (knee - s).max(0.0) - above_ratio * (s - knee).max(0.0)
}

fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + 540.0).rem_euclid(360.0) - 180.0
}

/// Cluster-wide hourly weather plus the freshwater pulse index that drives
/// salinity dips.
struct Weather {
    env: EnvSeries,
    start: i64,
    freshwater: Vec<f64>,
}

fn simulate_weather(first_year: i32, last_year: i32, seed: u64) -> Result<Weather, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let open = Utc.with_ymd_and_hms(first_year, SEASON_OPEN.0, SEASON_OPEN.1, 0, 0, 0).unwrap();
    let start = open - Duration::days(ENV_LEAD_DAYS);
    let end = Utc.with_ymd_and_hms(last_year, 10, 2, 0, 0, 0).unwrap();
    let n = ((end - start).num_hours() + 1) as usize;

    let unit = Normal::new(0.0, 1.0).unwrap();
    let exp1 = Exp::new(1.0).unwrap();
    let mut cols: BTreeMap<&str, Vec<f64>> = STANDARD_SERIES.iter().map(|&s| (s, Vec::with_capacity(n))).collect();
    let mut freshwater = Vec::with_capacity(n);

    let mut storm_left = 0u32;
    let mut intensity = 0.0;
    let mut cloud: f64 = 0.2;
    let mut fresh = 0.0;
    let mut regime = 45.0;
    let mut direction: f64 = 45.0;
    let mut pressure_anom = 0.0;
    let mut rh_noise = 0.0;
    let decay = (-1.0 / FRESHWATER_DECAY_HOURS).exp();
    let mut times = Vec::with_capacity(n);

    for h in 0..n {
        let t = start + Duration::hours(h as i64);
        times.push(t.timestamp());
        let doy = f64::from(t.ordinal());
        let warm = (5..=9).contains(&t.month());
        // The value at t covers the hour (t − 1h, t]; solar terms use its midpoint.
        let hour = f64::from(t.hour()) - 0.5;

        if storm_left == 0 && rng.random::<f64>() < if warm { 1.0 / 150.0 } else { 1.0 / 80.0 } {
            storm_left = 1 + (exp1.sample(&mut rng) * 7.0) as u32;
            intensity = 0.4 + exp1.sample(&mut rng) * 1.6;
            if rng.random::<f64>() < 0.7 {
                regime = WIND_ONSHORE_DEG;
            }
        }
        let raining = storm_left > 0;
        let precip = if raining {
            storm_left -= 1;
            if storm_left == 0 && rng.random::<f64>() < 0.6 {
                regime = 45.0;
            }
            round_to(intensity * (0.2 + 0.8 * exp1.sample(&mut rng)), 1)
        } else {
            0.0
        };
        if !raining && rng.random::<f64>() < 1.0 / 60.0 {
            regime = [45.0, 200.0, WIND_ONSHORE_DEG][rng.random_range(0..3)];
        }
        fresh = fresh * decay + precip;
        freshwater.push(fresh);

        let target = if raining { 0.9 } else { 0.15 + 0.1 * f64::from(u8::from(!warm)) };
        cloud = (0.92 * cloud + 0.08 * target + 0.05 * unit.sample(&mut rng)).clamp(0.0, 1.0);

        let season = (2.0 * std::f64::consts::PI * (doy - 80.0) / 365.0).sin();
        let daylen = 12.0 + 3.3 * season;
        let peak = 1000.0 * (0.6 + 0.35 * season);
        let phase = (hour - (11.0 - daylen / 2.0)) / daylen;
        let clear = if (0.0..=1.0).contains(&phase) { peak * (std::f64::consts::PI * phase).sin().powf(1.3) } else { 0.0 };
        let ghi = round_to(clear * (1.0 - 0.75 * cloud), 1);
        let diurnal = (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin();

        direction = (direction + 0.15 * angle_diff(regime, direction) + 12.0 * unit.sample(&mut rng)).rem_euclid(360.0);
        let gust = match regime as i64 {
            45 => 7.0,
            135 => 6.0,
            _ => 3.0,
        };
        let wind_speed = (gust * (0.6 + 0.4 * cloud) + 1.2 * unit.sample(&mut rng)).max(0.0);
        pressure_anom = 0.97 * pressure_anom + 0.4 * unit.sample(&mut rng);
        rh_noise = 0.9 * rh_noise + 1.5 * unit.sample(&mut rng);
        let tide = 0.18 * (2.0 * std::f64::consts::PI * h as f64 / 12.42).sin()
            + 0.08 * (2.0 * std::f64::consts::PI * h as f64 / 23.93).sin();

        let mut put = |name: &str, v: f64| cols.get_mut(name).expect("standard series").push(v);
        put("precipitation", precip);
        put("ghi", ghi);
        put("wind_direction", round_to(direction, 1).rem_euclid(360.0));
        put("wind_speed", round_to(wind_speed, 2));
        put("surface_pressure", round_to(1014.0 - 9.0 * cloud + pressure_anom, 2));
        put("rel_humidity", round_to((58.0 + 28.0 * cloud - 12.0 * diurnal + rh_noise).clamp(5.0, 100.0), 2));
        put("dewpoint", round_to(12.0 + 6.0 * season + 4.0 * cloud + 0.5 * rh_noise, 2));
        put("precipitable_water", round_to(20.0 + 8.0 * season + 12.0 * cloud + 0.8 * unit.sample(&mut rng), 2));
        put("water_level", round_to(tide + 0.15 * cloud, 3));
    }

    let mut env = EnvSeries::new();
    for (name, values) in cols {
        env.insert(name.to_string(), HourlySeries::from_unix(name, times.clone(), values)?);
    }
    Ok(Weather { env, start: start.timestamp(), freshwater })
}

fn sites(cfg: &SynthConfig) -> Vec<SiteTruth> {
    let g = cfg.site_gradient;
    let b = &cfg.betas;
    (0..cfg.n_sites)
        .map(|i| {
            let position = if cfg.n_sites == 1 { 0.0 } else { i as f64 / (cfg.n_sites - 1) as f64 };
            let p = g * position;
            // Freshwater and weather influence stay strong until the far west.
            let reach = 1.0 - 0.97 * p.powi(3);
            SiteTruth {
                site: site_id(i),
                position,
                beta0_ec: b.intercept_ec - b.site_drop * p,
                beta0_ent: b.intercept_ent - 0.5 * b.site_drop * p,
                salinity_base: 37.0 - 1.2 * p - p.powi(3),
                spring_freshening: 3.6 * reach,
                dip_amplitude: 1.8 * reach,
                exposure: reach,
            }
        })
        .collect()
}

fn terms(cfg: &SynthConfig) -> Vec<TruthTerm> {
    let b = &cfg.betas;
    let term = |feature: &str, indicator, beta, (mean, sd): (f64, f64)| TruthTerm {
        feature: feature.to_string(),
        indicator,
        beta,
        mean,
        sd,
    };
    vec![
        term("salinity", Indicator::Ec, b.salinity, MOMENTS_SALINITY),
        term("ghi_lag1", Indicator::Ec, -b.ghi, MOMENTS_GHI),
        term("cprec_2d", Indicator::Ec, b.precipitation, MOMENTS_PRECIP),
        term("salinity", Indicator::Ent, b.ent_share * b.salinity, MOMENTS_SALINITY),
        term("ghi_lag1", Indicator::Ent, -b.ent_share * b.ghi, MOMENTS_GHI),
        term("cprec_2d", Indicator::Ent, b.ent_share * b.precipitation, MOMENTS_PRECIP),
        term("wind_direction", Indicator::Ent, b.wind, MOMENTS_WIND),
    ]
}

fn sample_dates(cfg: &SynthConfig, seed: u64) -> Vec<(i32, NaiveDate)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &year in &cfg.seasons {
        let open = NaiveDate::from_ymd_opt(year, SEASON_OPEN.0, SEASON_OPEN.1).unwrap();
        let first = open + Duration::days(rng.random_range(0..=3));
        for k in 0..cfg.samples_per_season_per_site {
            out.push((year, first + Duration::days(i64::from(cfg.sample_interval_days) * k as i64)));
        }
    }
    out
}

/// Generate the cluster. Identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let weather = simulate_weather(cfg.seasons[0], *cfg.seasons.last().unwrap(), derive_seed(cfg.seed, 0))?;
    let dates = sample_dates(cfg, derive_seed(cfg.seed, 1));
    let sites = sites(cfg);
    let terms = terms(cfg);

    let per_site: Vec<Vec<(SampleRecord, TruthRow)>> = sites
        .par_iter()
        .enumerate()
        .map(|(i, site)| site_samples(cfg, site, i, &dates, &weather, &terms))
        .collect::<Result<_, SynthError>>()?;

    let (samples, rows) = per_site.into_iter().flatten().unzip();
    Ok(SynthOutput { samples, env: weather.env, truth: SynthTruth { config: cfg.clone(), sites, terms, rows } })
}

fn site_samples(
    cfg: &SynthConfig,
    site: &SiteTruth,
    index: usize,
    dates: &[(i32, NaiveDate)],
    weather: &Weather,
    terms: &[TruthTerm],
) -> Result<Vec<(SampleRecord, TruthRow)>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 100 + index as u64));
    let unit = Normal::new(0.0, 1.0).unwrap();
    let first_year = cfg.late_starts.get(&site.site).copied().unwrap_or(i32::MIN);
    let env = &weather.env;
    let series = |name: &str| &env[name];
    let b = &cfg.betas;

    let mut out = Vec::new();
    let mut wet_year = (i32::MIN, 0.0);
    for &(year, date) in dates {
        if year < first_year {
            continue;
        }
        if wet_year.0 != year {
            wet_year = (year, 0.12 * site.spring_freshening * unit.sample(&mut rng));
        }
        // Morning route from east to west, 06:00 UTC onward.
        let minute = 10 * index as i64 + rng.random_range(0..20);
        let t: DateTime<Utc> = Utc.from_utc_datetime(&date.and_hms_opt(6, 0, 0).unwrap()) + Duration::minutes(minute);
        let hour_index = ((t.timestamp() - weather.start) / 3600) as usize;
        let fresh = weather.freshwater[hour_index];

        let doy = f64::from(date.ordinal());
        let sea_temp = round_to(19.5 + 6.0 * (2.0 * std::f64::consts::PI * (doy - 135.0) / 365.0).sin() + 0.7 * unit.sample(&mut rng), 2);
        let air_temp = round_to(sea_temp + 1.5 + 1.5 * unit.sample(&mut rng), 2);
        let open = NaiveDate::from_ymd_opt(year, SEASON_OPEN.0, SEASON_OPEN.1).unwrap();
        let progress = ((date - open).num_days() as f64 / 138.0).clamp(0.0, 1.0);
        let spring = site.spring_freshening * (1.0 - progress) + wet_year.1;
        let dip = site.dip_amplitude * (1.0 - (-fresh / 5.0).exp()) * (0.7 + 0.6 * rng.random::<f64>());
        let salinity = round_to((site.salinity_base - spring - dip + 0.2 * unit.sample(&mut rng)).clamp(0.0, 45.0), 2);

        let ghi_lag1 = series("ghi").lagged_value(t, Duration::hours(1))?;
        let cprec_2d = series("precipitation").cumulative_window(t, Duration::hours(48))?;
        let wind_dir = series("wind_direction").interp_angle_at(t)?;
        let drivers = |feature: &str| match feature {
            "salinity" => hinge(salinity, cfg.salinity_knee, b.salinity_above_ratio),
            "ghi_lag1" => ghi_lag1,
            "cprec_2d" => cprec_2d,
            "wind_direction" => (wind_dir - WIND_ONSHORE_DEG).to_radians().cos(),
            _ => unreachable!("unknown generating feature"),
        };
        let contributions: Vec<f64> = terms
            .iter()
            .map(|term| {
                let weight = if term.feature == "salinity" { 1.0 } else { site.exposure };
                weight * term.beta * (drivers(&term.feature) - term.mean) / term.sd
            })
            .collect();
        let sum_for = |ind| terms.iter().zip(&contributions).filter(|(t, _)| t.indicator == ind).map(|(_, c)| c).sum::<f64>();
        let eta_ec = site.beta0_ec + sum_for(Indicator::Ec);
        let eta_ent = site.beta0_ent + sum_for(Indicator::Ent);

        let noise_ec = cfg.noise_sigma * unit.sample(&mut rng);
        let noise_ent = cfg.noise_sigma * unit.sample(&mut rng);
        let zero_ec = rng.random::<f64>() < cfg.zero_prob;
        let zero_ent = rng.random::<f64>() < cfg.zero_prob;
        let count = |eta: f64, zero: bool| if zero { 0 } else { inv_log10p(eta).min(u64::from(u32::MAX)) as u32 };

        out.push((
            SampleRecord {
                site_id: site.site.clone(),
                timestamp: t,
                ec: count(eta_ec + noise_ec, zero_ec),
                ent: count(eta_ent + noise_ent, zero_ent),
                air_temp,
                sea_temp,
                salinity,
            },
            TruthRow { eta_ec, eta_ent, contributions, zero_ec, zero_ent },
        ));
    }
    Ok(out)
}

/// Expected |contribution| of a generating term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermImportance {
    pub feature: String,
    pub importance: f64,
}

/// Generating terms for one indicator ordered by expected |contribution|.
///
/// Drivers are standardized by their nominal moments, so under a normal
/// approximation `E|β·z| = |β|·√(2/π)`. Ties are broken by feature name.
pub fn truth_importance(truth: &SynthTruth, indicator: Indicator) -> Vec<TermImportance> {
    let scale = (2.0 / std::f64::consts::PI).sqrt();
    let mut out: Vec<TermImportance> = truth
        .terms
        .iter()
        .filter(|t| t.indicator == indicator)
        .map(|t| TermImportance { feature: t.feature.clone(), importance: t.beta.abs() * scale })
        .collect();
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance).then_with(|| a.feature.cmp(&b.feature)));
    out
}

/// Per-site descriptive statistics for one indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub mean: f64,
    pub std: f64,
    pub max: u32,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSummary {
    pub site: String,
    pub first_year: i32,
    pub last_year: i32,
    pub n: usize,
    pub ec: CountSummary,
    pub ent: CountSummary,
}

fn count_summary(values: &mut [u32]) -> CountSummary {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = values.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    values.sort_unstable();
    let mid = values.len() / 2;
    let median = if values.len().is_multiple_of(2) {
        (f64::from(values[mid - 1]) + f64::from(values[mid])) / 2.0
    } else {
        f64::from(values[mid])
    };
    CountSummary { mean, std: var.sqrt(), max: *values.last().unwrap(), median }
}

/// Summary per site in first-appearance order (sample std).
pub fn site_summaries(samples: &[SampleRecord]) -> Vec<SiteSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&SampleRecord>> = BTreeMap::new();
    for s in samples {
        let g = groups.entry(&s.site_id).or_default();
        if g.is_empty() {
            order.push(&s.site_id);
        }
        g.push(s);
    }
    order
        .into_iter()
        .map(|site| {
            let rows = &groups[site];
            let mut ec: Vec<u32> = rows.iter().map(|r| r.ec).collect();
            let mut ent: Vec<u32> = rows.iter().map(|r| r.ent).collect();
            SiteSummary {
                site: site.to_string(),
                first_year: rows.iter().map(|r| r.timestamp.year()).min().unwrap(),
                last_year: rows.iter().map(|r| r.timestamp.year()).max().unwrap(),
                n: rows.len(),
                ec: count_summary(&mut ec),
                ent: count_summary(&mut ent),
            }
        })
        .collect()
}

/// Fixed-width text rendering of [`site_summaries`].
pub fn format_summary(rows: &[SiteSummary]) -> String {
    let mut s = format!(
        "{:<6}{:>11}{:>6} |{:>9}{:>9}{:>7}{:>8} |{:>9}{:>9}{:>7}{:>8}\n",
        "site", "period", "n", "EC mean", "std", "max", "median", "ENT mean", "std", "max", "median"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<6}{:>11}{:>6} |{:>9.1}{:>9.1}{:>7}{:>8.1} |{:>9.1}{:>9.1}{:>7}{:>8.1}\n",
            r.site,
            format!("{}-{}", r.first_year, r.last_year),
            r.n,
            r.ec.mean,
            r.ec.std,
            r.ec.max,
            r.ec.median,
            r.ent.mean,
            r.ent.std,
            r.ent.max,
            r.ent.median
        ));
    }
    s
}

pub const SAMPLES_FILE: &str = "samples.csv";
pub const ENV_DIR: &str = "env";
pub const TRUTH_FILE: &str = "truth.json";

/// Write `samples.csv`, `env/<series>.csv` and `truth.json` under `dir`.
pub fn write_dataset(dir: &Path, out: &SynthOutput) -> Result<(), SynthError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SynthError::Io { path, source }
    };
    let env_dir = dir.join(ENV_DIR);
    std::fs::create_dir_all(&env_dir).map_err(io(&env_dir))?;
    let p = dir.join(SAMPLES_FILE);
    write_samples(std::fs::File::create(&p).map_err(io(&p))?, &out.samples).map_err(io(&p))?;
    for (name, series) in &out.env {
        let p = env_dir.join(format!("{name}.csv"));
        series.write_csv(std::fs::File::create(&p).map_err(io(&p))?).map_err(io(&p))?;
    }
    let p = dir.join(TRUTH_FILE);
    let mut f = std::io::BufWriter::new(std::fs::File::create(&p).map_err(io(&p))?);
    let json = serde_json::to_string_pretty(&out.truth).expect("truth serializes");
    f.write_all(json.as_bytes()).and_then(|_| f.write_all(b"\n")).and_then(|_| f.flush()).map_err(io(&p))?;
    Ok(())
}
