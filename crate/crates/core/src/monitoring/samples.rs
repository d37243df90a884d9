use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use super::{parse_timestamp, DataError};

/// One routine-monitoring observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub site_id: String,
    pub timestamp: DateTime<Utc>,
    /// E. coli, CFU/100 mL
    pub ec: u32,
    /// Enterococci, CFU/100 mL
    pub ent: u32,
    pub air_temp: f64,
    pub sea_temp: f64,
    pub salinity: f64,
}

/// Month/day window, inclusive on both ends, applied to every year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonWindow {
    pub start: (u32, u32),
    pub end: (u32, u32),
}

impl SeasonWindow {
    /// Mid-May through the end of September.
    pub const BATHING: SeasonWindow = SeasonWindow { start: (5, 15), end: (9, 30) };

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        let md = (t.month(), t.day());
        md >= self.start && md <= self.end
    }
}

impl Default for SeasonWindow {
    fn default() -> Self {
        Self::BATHING
    }
}

/// Header names for each logical sample field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub site_id: String,
    pub timestamp: String,
    pub ec: String,
    pub ent: String,
    pub air_temp: String,
    pub sea_temp: String,
    pub salinity: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            site_id: "site".into(),
            timestamp: "timestamp".into(),
            ec: "ec".into(),
            ent: "ent".into(),
            air_temp: "air_temp".into(),
            sea_temp: "sea_temp".into(),
            salinity: "salinity".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SampleSchema {
    pub columns: ColumnMap,
    /// Offset applied to timestamps written without a zone.
    pub utc_offset_minutes: i32,
    pub season: SeasonWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Parsed rows plus the rows that failed parsing or validation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleTable {
    pub records: Vec<SampleRecord>,
    pub rejected: Vec<RowError>,
}

impl SampleRecord {
    pub fn validate(&self, season: &SeasonWindow) -> Result<(), String> {
        if !(0.0..=45.0).contains(&self.salinity) {
            return Err(format!("salinity {} outside [0, 45]", self.salinity));
        }
        if !self.air_temp.is_finite() || !self.sea_temp.is_finite() {
            return Err("temperatures must be finite".into());
        }
        if !season.contains(self.timestamp) {
            return Err(format!("timestamp {} outside bathing season", self.timestamp.format("%Y-%m-%dT%H:%M")));
        }
        Ok(())
    }
}

pub fn parse_samples(path: &Path, schema: &SampleSchema) -> Result<SampleTable, DataError> {
    let f = std::fs::File::open(path).map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
    read_samples(&path.display().to_string(), std::io::BufReader::new(f), schema)
}

pub(crate) fn read_samples<R: Read>(file: &str, input: R, schema: &SampleSchema) -> Result<SampleTable, DataError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(|e| DataError::csv(file, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn { file: file.into(), column: name.into() })
    };
    let c = &schema.columns;
    let idx = [
        find(&c.site_id)?,
        find(&c.timestamp)?,
        find(&c.ec)?,
        find(&c.ent)?,
        find(&c.air_temp)?,
        find(&c.sea_temp)?,
        find(&c.salinity)?,
    ];
    let mut table = SampleTable::default();
    for rec in r.records() {
        let rec = rec.map_err(|e| DataError::csv(file, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |i: usize| rec.get(idx[i]).unwrap_or("");
        match parse_row(cell, schema) {
            Ok(s) => match s.validate(&schema.season) {
                Ok(()) => table.records.push(s),
                Err(message) => table.rejected.push(RowError { line, message }),
            },
            Err(message) => table.rejected.push(RowError { line, message }),
        }
    }
    Ok(table)
}

fn parse_row<'a>(cell: impl Fn(usize) -> &'a str, schema: &SampleSchema) -> Result<SampleRecord, String> {
    let count = |i: usize, name: &str| -> Result<u32, String> {
        let raw = cell(i);
        let v: i64 = raw.parse().map_err(|_| format!("{name} `{raw}` is not an integer count"))?;
        if v < 0 {
            return Err(format!("{name} must be ≥ 0"));
        }
        u32::try_from(v).map_err(|_| format!("{name} {v} too large"))
    };
    let real = |i: usize, name: &str| -> Result<f64, String> {
        let raw = cell(i);
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{name} `{raw}` is not a finite number"))
    };
    let site_id = cell(0).to_string();
    if site_id.is_empty() {
        return Err("site is empty".into());
    }
    Ok(SampleRecord {
        site_id,
        timestamp: parse_timestamp(cell(1), schema.utc_offset_minutes)?,
        ec: count(2, "ec")?,
        ent: count(3, "ent")?,
        air_temp: real(4, "air_temp")?,
        sea_temp: real(5, "sea_temp")?,
        salinity: real(6, "salinity")?,
    })
}

/// Write samples with the default column names and UTC timestamps.
pub fn write_samples<W: Write>(out: W, samples: &[SampleRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "site,timestamp,ec,ent,air_temp,sea_temp,salinity")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.site_id,
            s.timestamp.format("%Y-%m-%dT%H:%M"),
            s.ec,
            s.ent,
            s.air_temp,
            s.sea_temp,
            s.salinity
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    const HEADER: &str = "site,timestamp,ec,ent,air_temp,sea_temp,salinity\n";

    fn read(body: &str) -> Result<SampleTable, DataError> {
        read_samples("samples.csv", format!("{HEADER}{body}").as_bytes(), &SampleSchema::default())
    }

    #[test]
    fn maps_fields_directly() {
        let t = read("KE,2020-06-15T08:30,72,27,24.1,21.0,35.2\n").unwrap();
        assert!(t.rejected.is_empty());
        let s = &t.records[0];
        assert_eq!(s.site_id, "KE");
        assert_eq!(s.timestamp, Utc.with_ymd_and_hms(2020, 6, 15, 8, 30, 0).unwrap());
        assert_eq!((s.ec, s.ent), (72, 27));
        assert_eq!((s.air_temp, s.sea_temp, s.salinity), (24.1, 21.0, 35.2));
    }

    #[test]
    fn header_only_is_empty() {
        let t = read("").unwrap();
        assert!(t.records.is_empty() && t.rejected.is_empty());
    }

    #[test]
    fn invalid_rows_are_collected_with_line_numbers() {
        let t = read(
            "KE,2020-06-15T08:30,-5,27,24.1,21.0,35.2\n\
             KE,2020-06-16T08:30,1,2,24.1,21.0,35.2\n\
             KE,2020-06-17T08:30,1,x,24.1,21.0,35.2\n\
             KE,2020-06-18T08:30,1,2,24.1,21.0,55\n\
             KE,2020-01-18T08:30,1,2,24.1,21.0,35\n",
        )
        .unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.rejected.len(), 4);
        assert_eq!(t.rejected[0].line, 2);
        assert_eq!(t.rejected[0].message, "ec must be ≥ 0");
        assert_eq!(t.rejected[1].line, 4);
        assert!(t.rejected[2].message.contains("salinity"));
        assert!(t.rejected[3].message.contains("season"));
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = read_samples("s.csv", "site,timestamp,ec\n".as_bytes(), &SampleSchema::default()).unwrap_err();
        match err {
            DataError::MissingColumn { column, .. } => assert_eq!(column, "ent"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_read() {
        let s = SampleRecord {
            site_id: "S01".into(),
            timestamp: Utc.with_ymd_and_hms(2019, 7, 1, 6, 45, 0).unwrap(),
            ec: 12,
            ent: 0,
            air_temp: 25.5,
            sea_temp: 23.25,
            salinity: 36.125,
        };
        let mut buf = Vec::new();
        write_samples(&mut buf, std::slice::from_ref(&s)).unwrap();
        let t = read_samples("x", buf.as_slice(), &SampleSchema::default()).unwrap();
        assert_eq!(t.records, vec![s]);
    }
}
