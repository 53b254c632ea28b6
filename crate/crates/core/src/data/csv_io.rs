//! Raw analyzer CSV layout.
//!
//! Header (29 columns):
//!
//! ```text
//! timestamp,frequency_hz,
//! voltage_l1,current_l1,thd_i_l1,active_power_l1,reactive_power_l1,power_factor_l1,h3_l1,h5_l1,h7_l1,
//! ... same nine columns for l2 and l3
//! ```
//!
//! One row per 30 s sample, UTF-8, `.` as the decimal separator.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::record::{AnalyzerRecord, LineMeasurement};
use crate::error::{Error, Result};

const LINE_FIELDS: [&str; 9] = [
    "voltage",
    "current",
    "thd_i",
    "active_power",
    "reactive_power",
    "power_factor",
    "h3",
    "h5",
    "h7",
];

pub const RAW_COLUMN_COUNT: usize = 2 + 3 * LINE_FIELDS.len();

pub fn raw_header() -> Vec<String> {
    let mut cols = vec!["timestamp".to_string(), "frequency_hz".to_string()];
    for line in 1..=3 {
        for f in LINE_FIELDS {
            cols.push(format!("{f}_l{line}"));
        }
    }
    cols
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    FieldCount { found: usize },
    Unparseable { column: String },
    NonFinite { column: String },
    NegativeCurrent { column: String },
    PowerFactorOutOfRange { column: String },
    NegativeHarmonic { column: String },
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::FieldCount { .. } => "field-count",
            RejectReason::Unparseable { .. } => "unparseable",
            RejectReason::NonFinite { .. } => "non-finite",
            RejectReason::NegativeCurrent { .. } => "negative-current",
            RejectReason::PowerFactorOutOfRange { .. } => "power-factor-range",
            RejectReason::NegativeHarmonic { .. } => "negative-harmonic",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::FieldCount { found } => {
                write!(f, "{}: {found} fields, expected {RAW_COLUMN_COUNT}", self.code())
            }
            RejectReason::Unparseable { column }
            | RejectReason::NonFinite { column }
            | RejectReason::NegativeCurrent { column }
            | RejectReason::PowerFactorOutOfRange { column }
            | RejectReason::NegativeHarmonic { column } => write!(f, "{} ({column})", self.code()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    /// 1-based line number in the file, header is line 1.
    pub line: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub records: Vec<AnalyzerRecord>,
    pub rejects: Vec<RejectedRow>,
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_raw_csv(file, path)
}

/// Parses raw analyzer rows. Row-level defects go to `rejects`; a bad header
/// or a timestamp that does not increase fails the whole read.
pub fn parse_raw_csv<R: Read>(reader: R, source: &Path) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = rdr.records();

    let header = match rows.next() {
        Some(h) => h.map_err(|e| schema(source, e.to_string()))?,
        None => return Err(schema(source, "missing header")),
    };
    let expected = raw_header();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(schema(
            source,
            format!("header does not match the raw analyzer layout ({} columns)", header.len()),
        ));
    }

    let mut out = Ingested::default();
    let mut last_ts: Option<i64> = None;
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        match parse_row(&row, &expected) {
            Ok(rec) => {
                if let Some(prev) = last_ts {
                    if rec.timestamp <= prev {
                        return Err(Error::Parse {
                            line,
                            message: format!(
                                "timestamp {} does not increase (previous {prev})",
                                rec.timestamp
                            ),
                        });
                    }
                }
                last_ts = Some(rec.timestamp);
                out.records.push(rec);
            }
            Err(reason) => out.rejects.push(RejectedRow { line, reason }),
        }
    }
    Ok(out)
}

fn schema(path: &Path, msg: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: msg.into(),
    }
}

fn parse_row(
    row: &csv::StringRecord,
    header: &[String],
) -> std::result::Result<AnalyzerRecord, RejectReason> {
    if row.len() != RAW_COLUMN_COUNT {
        return Err(RejectReason::FieldCount { found: row.len() });
    }
    let timestamp: i64 = row[0].parse().map_err(|_| RejectReason::Unparseable {
        column: header[0].clone(),
    })?;
    let mut values = [0.0f64; RAW_COLUMN_COUNT - 1];
    for (k, v) in values.iter_mut().enumerate() {
        let col = k + 1;
        let parsed: f64 = row[col].parse().map_err(|_| RejectReason::Unparseable {
            column: header[col].clone(),
        })?;
        if !parsed.is_finite() {
            return Err(RejectReason::NonFinite {
                column: header[col].clone(),
            });
        }
        *v = parsed;
    }

    let frequency = values[0];
    let mut lines = [LineMeasurement::default(); 3];
    for (l, m) in lines.iter_mut().enumerate() {
        let base = 1 + l * LINE_FIELDS.len();
        let col = |k: usize| header[1 + base + k].clone();
        *m = LineMeasurement {
            voltage: values[base],
            current: values[base + 1],
            thd_i: values[base + 2],
            active_power: values[base + 3],
            reactive_power: values[base + 4],
            power_factor: values[base + 5],
            h3: values[base + 6],
            h5: values[base + 7],
            h7: values[base + 8],
        };
        if m.current < 0.0 {
            return Err(RejectReason::NegativeCurrent { column: col(1) });
        }
        if !(0.0..=1.0).contains(&m.power_factor) {
            return Err(RejectReason::PowerFactorOutOfRange { column: col(5) });
        }
        for (k, h) in m.harmonics().iter().enumerate() {
            if *h < 0.0 {
                return Err(RejectReason::NegativeHarmonic { column: col(6 + k) });
            }
        }
    }
    Ok(AnalyzerRecord {
        timestamp,
        frequency,
        lines,
    })
}

/// Writes records with shortest round-trip decimal formatting, so
/// re-ingesting reproduces every value exactly.
pub fn write_raw_csv(path: impl AsRef<Path>, records: &[AnalyzerRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    emit_raw_csv(file, records).map_err(|e| Error::io(path, e))
}

pub fn emit_raw_csv<W: Write>(writer: W, records: &[AnalyzerRecord]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(raw_header())?;
    let mut fields: Vec<String> = Vec::with_capacity(RAW_COLUMN_COUNT);
    for r in records {
        fields.clear();
        fields.push(r.timestamp.to_string());
        fields.push(r.frequency.to_string());
        for m in &r.lines {
            for v in [
                m.voltage,
                m.current,
                m.thd_i,
                m.active_power,
                m.reactive_power,
                m.power_factor,
                m.h3,
                m.h5,
                m.h7,
            ] {
                fields.push(v.to_string());
            }
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_line() -> String {
        raw_header().join(",")
    }

    fn parse(text: &str) -> Result<Ingested> {
        parse_raw_csv(text.as_bytes(), Path::new("mem.csv"))
    }

    fn row(ts: i64, current: f64) -> String {
        let mut f = vec![ts.to_string(), "50.01".into()];
        for _ in 0..3 {
            f.extend(
                ["229.5", &current.to_string(), "12.5", "5000", "900", "0.93", "3.25", "1.5", "0.75"]
                    .map(String::from),
            );
        }
        f.join(",")
    }

    #[test]
    fn header_only_gives_empty() {
        let got = parse(&format!("{}\n", header_line())).unwrap();
        assert!(got.records.is_empty());
        assert!(got.rejects.is_empty());
    }

    #[test]
    fn missing_or_wrong_header_fails() {
        assert!(matches!(parse(""), Err(Error::Schema { .. })));
        assert!(matches!(parse("a,b,c\n"), Err(Error::Schema { .. })));
    }

    #[test]
    fn one_row_fields_bit_equal() {
        let text = format!("{}\n{}\n", header_line(), row(1_700_000_000, 23.456));
        let got = parse(&text).unwrap();
        assert_eq!(got.records.len(), 1);
        let r = &got.records[0];
        assert_eq!(r.timestamp, 1_700_000_000);
        assert_eq!(r.frequency, 50.01);
        assert_eq!(r.lines[1].current, 23.456);
        assert_eq!(r.lines[2].power_factor, 0.93);
        assert_eq!(r.lines[0].h7, 0.75);
    }

    #[test]
    fn negative_current_rejected_with_reason() {
        let text = format!(
            "{}\n{}\n{}\n",
            header_line(),
            row(30, -1.0),
            row(60, 5.0)
        );
        let got = parse(&text).unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.rejects.len(), 1);
        assert_eq!(got.rejects[0].line, 2);
        assert_eq!(got.rejects[0].reason.code(), "negative-current");
    }

    #[test]
    fn unparseable_and_short_rows_rejected() {
        let bad = row(30, 5.0).replace("229.5", "abc");
        let text = format!("{}\n{}\n1,2,3\n", header_line(), bad);
        let got = parse(&text).unwrap();
        assert_eq!(got.rejects.len(), 2);
        assert_eq!(got.rejects[0].reason.code(), "unparseable");
        assert_eq!(got.rejects[1].reason, RejectReason::FieldCount { found: 3 });
    }

    #[test]
    fn timestamp_regression_is_an_error() {
        let text = format!("{}\n{}\n{}\n", header_line(), row(60, 5.0), row(30, 5.0));
        assert!(matches!(parse(&text), Err(Error::Parse { line: 3, .. })));
    }
}
