//! Hourly environmental signals: interpolation, lags and antecedent sums.
//!
//! Every point carries the accumulation (or mean level) of the hour that
//! ends at its timestamp, so the point at `τ` covers the interval `(τ − 1h, τ]`.
//! Instantaneous queries interpolate linearly between knots; antecedent
//! windows integrate the hour intervals against the window, weighting
//! partially covered hours by their fractional overlap.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use super::{parse_timestamp, DataError};

const HOUR: i64 = 3600;

/// A time-indexed scalar signal with at most one hour between points.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    name: String,
    times: Vec<i64>,
    values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(name: impl Into<String>, points: Vec<(DateTime<Utc>, f64)>) -> Result<Self, DataError> {
        let (times, values) = points.into_iter().map(|(t, v)| (t.timestamp(), v)).unzip();
        Self::from_unix(name, times, values)
    }

    /// Build from unix-second timestamps.
    pub fn from_unix(name: impl Into<String>, times: Vec<i64>, values: Vec<f64>) -> Result<Self, DataError> {
        let name = name.into();
        if times.len() != values.len() {
            return Err(DataError::Series { series: name, message: "time/value length mismatch".into() });
        }
        if times.is_empty() {
            return Err(DataError::Series { series: name, message: "series has no points".into() });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::Series {
                    series: name,
                    message: format!("non-finite value at {}", fmt_unix(times[i])),
                });
            }
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(DataError::Series {
                    series: name,
                    message: format!("timestamps not strictly increasing at {}", fmt_unix(w[1])),
                });
            }
            if w[1] - w[0] > HOUR {
                return Err(DataError::Gap { series: name, from: fmt_unix(w[0]), to: fmt_unix(w[1]) });
            }
        }
        Ok(Self { name, times, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> DateTime<Utc> {
        from_unix(self.times[0])
    }

    pub fn last(&self) -> DateTime<Utc> {
        from_unix(*self.times.last().expect("non-empty"))
    }

    pub fn points(&self) -> impl Iterator<Item = (DateTime<Utc>, f64)> + '_ {
        self.times.iter().zip(&self.values).map(|(&t, &v)| (from_unix(t), v))
    }

    pub fn unix_times(&self) -> &[i64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bracketing knot pair and fraction for `t` within coverage.
    fn bracket(&self, t: i64) -> Result<(usize, usize, f64), DataError> {
        let first = self.times[0];
        let last = *self.times.last().expect("non-empty");
        if t < first || t > last {
            return Err(DataError::OutOfRange {
                series: self.name.clone(),
                from: fmt_unix(t.min(first)),
                to: fmt_unix(t.max(last)),
            });
        }
        match self.times.binary_search(&t) {
            Ok(i) => Ok((i, i, 0.0)),
            Err(i) => {
                let (lo, hi) = (i - 1, i);
                let frac = (t - self.times[lo]) as f64 / (self.times[hi] - self.times[lo]) as f64;
                Ok((lo, hi, frac))
            }
        }
    }

    /// Linearly interpolated value at `t`; exact at knots, no extrapolation.
    pub fn interp_at(&self, t: DateTime<Utc>) -> Result<f64, DataError> {
        let (lo, hi, a) = self.bracket(t.timestamp())?;
        if lo == hi {
            return Ok(self.values[lo]);
        }
        Ok((1.0 - a) * self.values[lo] + a * self.values[hi])
    }

    /// Interpolation for compass directions in degrees: follows the shorter
    /// arc between knots and returns a value in `[0, 360)`.
    pub fn interp_angle_at(&self, t: DateTime<Utc>) -> Result<f64, DataError> {
        let (lo, hi, a) = self.bracket(t.timestamp())?;
        let from = self.values[lo];
        let v = if lo == hi {
            from
        } else {
            let mut delta = (self.values[hi] - from) % 360.0;
            if delta > 180.0 {
                delta -= 360.0;
            } else if delta < -180.0 {
                delta += 360.0;
            }
            from + a * delta
        };
        let wrapped = v.rem_euclid(360.0);
        Ok(if wrapped >= 360.0 { 0.0 } else { wrapped })
    }

    /// Value `lag` before `t`.
    pub fn lagged_value(&self, t: DateTime<Utc>, lag: Duration) -> Result<f64, DataError> {
        self.interp_at(t - lag)
    }

    /// Sum of hourly values over the antecedent window `(t − horizon, t]`.
    ///
    /// Requires the hour intervals to cover the whole window: the earliest
    /// coverable instant is one hour before the first point.
    pub fn cumulative_window(&self, t: DateTime<Utc>, horizon: Duration) -> Result<f64, DataError> {
        let end = t.timestamp();
        let start = end - horizon.num_seconds();
        if horizon.num_seconds() <= 0 {
            return Err(DataError::Series { series: self.name.clone(), message: "window horizon must be positive".into() });
        }
        let covered_from = self.times[0] - HOUR;
        let covered_to = *self.times.last().expect("non-empty");
        if start < covered_from {
            return Err(DataError::OutOfRange {
                series: self.name.clone(),
                from: fmt_unix(start),
                to: fmt_unix(covered_from.min(end)),
            });
        }
        if end > covered_to {
            return Err(DataError::OutOfRange {
                series: self.name.clone(),
                from: fmt_unix(covered_to.max(start)),
                to: fmt_unix(end),
            });
        }
        // Points whose hour interval (τ − 1h, τ] meets (start, end]: start < τ < end + 1h.
        let lo = self.times.partition_point(|&tau| tau <= start);
        let mut total = 0.0;
        for i in lo..self.times.len() {
            let tau = self.times[i];
            if tau - HOUR >= end {
                break;
            }
            let overlap = tau.min(end) - (tau - HOUR).max(start);
            if overlap <= 0 {
                continue;
            }
            if overlap == HOUR {
                total += self.values[i];
            } else {
                total += self.values[i] * overlap as f64 / HOUR as f64;
            }
        }
        Ok(total)
    }

    /// Parse a two-column `(timestamp, value)` table.
    pub fn read_csv<R: Read>(name: &str, input: R, utc_offset_minutes: i32) -> Result<Self, DataError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
        let headers = r.headers().map_err(|e| DataError::csv(name, e))?.clone();
        let col = |want: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(want));
        let ti = col("timestamp").ok_or_else(|| DataError::MissingColumn { file: name.into(), column: "timestamp".into() })?;
        let vi = col("value").ok_or_else(|| DataError::MissingColumn { file: name.into(), column: "value".into() })?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| DataError::csv(name, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let ts = rec.get(ti).unwrap_or("");
            let t = parse_timestamp(ts, utc_offset_minutes).map_err(|message| DataError::Row { file: name.into(), line, message })?;
            let raw = rec.get(vi).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| DataError::Row {
                file: name.into(),
                line,
                message: format!("value `{raw}` is not a number"),
            })?;
            times.push(t.timestamp());
            values.push(v);
        }
        Self::from_unix(name, times, values)
    }

    pub fn read_csv_file(name: &str, path: &Path, utc_offset_minutes: i32) -> Result<Self, DataError> {
        let f = std::fs::File::open(path).map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
        Self::read_csv(name, std::io::BufReader::new(f), utc_offset_minutes)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        writeln!(w, "timestamp,value")?;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{},{}", from_unix(t).format("%Y-%m-%dT%H:%M"), v)?;
        }
        w.flush()
    }
}

fn from_unix(t: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(t, 0).expect("timestamp within chrono range")
}

fn fmt_unix(t: i64) -> String {
    from_unix(t).format("%Y-%m-%dT%H:%M").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn at(h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 6, 15, h, m, 0).unwrap()
    }

    fn hourly(name: &str, start: DateTime<Utc>, vals: &[f64]) -> HourlySeries {
        let pts = vals.iter().enumerate().map(|(i, &v)| (start + Duration::hours(i as i64), v)).collect();
        HourlySeries::new(name, pts).unwrap()
    }

    #[test]
    fn interp_midpoint_and_knot() {
        let s = HourlySeries::new("wl", vec![(at(8, 0), 0.2), (at(9, 0), 0.4)]).unwrap();
        assert!((s.interp_at(at(8, 30)).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(s.interp_at(at(9, 0)).unwrap(), 0.4);
        let s = HourlySeries::new("wl", vec![(at(8, 0), 1.0), (at(9, 0), 3.0)]).unwrap();
        assert_eq!(s.interp_at(at(8, 15)).unwrap(), 1.5);
    }

    #[test]
    fn interp_refuses_extrapolation() {
        let s = HourlySeries::new("wl", vec![(at(8, 0), 0.2), (at(9, 0), 0.4)]).unwrap();
        assert!(matches!(s.interp_at(at(7, 59)), Err(DataError::OutOfRange { .. })));
        assert!(matches!(s.interp_at(at(9, 1)), Err(DataError::OutOfRange { .. })));
    }

    #[test]
    fn lag_examples() {
        let s = HourlySeries::new("ghi", vec![(at(7, 0), 100.0), (at(8, 0), 300.0), (at(9, 0), 300.0)]).unwrap();
        assert_eq!(s.lagged_value(at(8, 30), Duration::hours(1)).unwrap(), 200.0);
        assert_eq!(s.lagged_value(at(8, 30), Duration::zero()).unwrap(), s.interp_at(at(8, 30)).unwrap());
        let c = hourly("c", at(0, 0), &[4.2; 10]);
        for lag in 0..5 {
            assert_eq!(c.lagged_value(at(8, 10), Duration::hours(lag)).unwrap(), 4.2);
        }
    }

    #[test]
    fn window_examples() {
        let zero = hourly("p", at(0, 0), &[0.0; 24]);
        assert_eq!(zero.cumulative_window(at(20, 0), Duration::hours(12)).unwrap(), 0.0);
        let one = hourly("p", at(0, 0), &[1.0; 24]);
        assert_eq!(one.cumulative_window(at(12, 0), Duration::hours(4)).unwrap(), 4.0);
        // ..., 3, 2, 0, 5, 1 with the 1 at t
        let s = hourly("p", at(0, 0), &[9.0, 3.0, 2.0, 0.0, 5.0, 1.0]);
        assert_eq!(s.cumulative_window(at(5, 0), Duration::hours(4)).unwrap(), 8.0);
    }

    #[test]
    fn window_weights_partial_hours() {
        let s = hourly("p", at(0, 0), &[1.0, 2.0, 4.0, 8.0]);
        // (01:30, 02:30]: half of hour ending 02:00 (value 4) and half of hour ending 03:00 (value 8)
        let v = s.cumulative_window(at(2, 30), Duration::hours(1)).unwrap();
        assert!((v - 6.0).abs() < 1e-12);
    }

    #[test]
    fn window_reports_missing_history() {
        let s = hourly("p", at(5, 0), &[1.0; 5]);
        // earliest coverable instant is 04:00
        assert!(s.cumulative_window(at(8, 0), Duration::hours(4)).is_ok());
        let err = s.cumulative_window(at(8, 0), Duration::hours(5)).unwrap_err();
        match err {
            DataError::OutOfRange { from, to, .. } => {
                assert_eq!(from, "2020-06-15T03:00");
                assert_eq!(to, "2020-06-15T04:00");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaps_are_rejected() {
        let err = HourlySeries::new("p", vec![(at(1, 0), 0.0), (at(2, 30), 1.0)]).unwrap_err();
        assert!(matches!(err, DataError::Gap { .. }));
        let err = HourlySeries::new("p", vec![(at(1, 0), 0.0), (at(1, 0), 1.0)]).unwrap_err();
        assert!(matches!(err, DataError::Series { .. }));
    }

    #[test]
    fn angle_interpolation_takes_short_arc() {
        let s = HourlySeries::new("wd", vec![(at(8, 0), 350.0), (at(9, 0), 10.0)]).unwrap();
        assert!((s.interp_angle_at(at(8, 30)).unwrap() - 0.0).abs() < 1e-12);
        assert!((s.interp_angle_at(at(8, 15)).unwrap() - 355.0).abs() < 1e-12);
        assert!((s.interp_angle_at(at(8, 45)).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let s = hourly("p", at(0, 0), &[0.5, 1.25, 0.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = HourlySeries::read_csv("p", buf.as_slice(), 0).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn interp_is_piecewise_linear(
            vals in proptest::collection::vec(-1e3f64..1e3, 2..12),
            k in 0usize..11,
            minute in 0u32..=60,
        ) {
            let s = hourly("x", at(0, 0), &vals);
            let k = k % (vals.len() - 1);
            let t = at(0, 0) + Duration::hours(k as i64) + Duration::minutes(minute as i64);
            let a = minute as f64 / 60.0;
            let expected = (1.0 - a) * vals[k] + a * vals[k + 1];
            let got = s.interp_at(t).unwrap();
            prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }

        #[test]
        fn windows_are_additive(
            vals in proptest::collection::vec(0.0f64..50.0, 30..60),
            a in 1i64..12,
            b in 1i64..12,
        ) {
            let s = hourly("x", at(0, 0), &vals);
            let t = at(0, 0) + Duration::hours(vals.len() as i64 - 1);
            let whole = s.cumulative_window(t, Duration::hours(a + b)).unwrap();
            let parts = s.cumulative_window(t, Duration::hours(a)).unwrap()
                + s.cumulative_window(t - Duration::hours(a), Duration::hours(b)).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1e-12));
        }
    }
}
