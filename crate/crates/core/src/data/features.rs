//! Tabular model inputs and the 21-column feature CSV consumed by the filter
//! simulator.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::record::{AnalyzerRecord, HarmonicOrder, Line, SECONDS_PER_DAY};
use crate::error::{Error, Result};

pub const TABULAR_WIDTH: usize = 5;

/// `[sin(2πτ/day), cos(2πτ/day)]` for τ seconds past midnight.
pub fn time_of_day_features(seconds_of_day: i64) -> [f64; 2] {
    let angle = 2.0 * PI * seconds_of_day as f64 / SECONDS_PER_DAY as f64;
    [angle.sin(), angle.cos()]
}

/// `X = [sin τ, cos τ, I_L1, I_L2, I_L3]`, `y` = the line's harmonic magnitude.
pub fn make_tabular_features(
    records: &[AnalyzerRecord],
    line: Line,
    order: HarmonicOrder,
) -> (Array2<f64>, Array2<f64>) {
    let n = records.len();
    let mut x = Array2::zeros((n, TABULAR_WIDTH));
    let mut y = Array2::zeros((n, 1));
    for (i, r) in records.iter().enumerate() {
        let [s, c] = time_of_day_features(r.seconds_of_day());
        x[[i, 0]] = s;
        x[[i, 1]] = c;
        for l in Line::ALL {
            x[[i, 2 + l.index()]] = r.line(l).current;
        }
        y[[i, 0]] = r.line(line).harmonic(order);
    }
    (x, y)
}

pub fn harmonic_series(records: &[AnalyzerRecord], line: Line, order: HarmonicOrder) -> Vec<f64> {
    records.iter().map(|r| r.line(line).harmonic(order)).collect()
}

pub const FEATURE_COLUMNS: usize = 21;

pub fn feature_header() -> Vec<String> {
    let mut cols = Vec::with_capacity(FEATURE_COLUMNS);
    for l in 1..=3 {
        cols.push(format!("Fnd L{l}"));
        for kind in ["Act", "Pred"] {
            for n in [3, 5, 7] {
                cols.push(format!("{kind} L{l}_{n}"));
            }
        }
    }
    cols
}

/// Fundamental, actual and predicted 3rd/5th/7th magnitudes of one line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineFeatures {
    pub fundamental: f64,
    pub actual: [f64; 3],
    pub predicted: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureRow {
    pub lines: [LineFeatures; 3],
}

impl FeatureRow {
    pub fn to_values(&self) -> [f64; FEATURE_COLUMNS] {
        let mut v = [0.0; FEATURE_COLUMNS];
        for (l, lf) in self.lines.iter().enumerate() {
            let base = l * 7;
            v[base] = lf.fundamental;
            v[base + 1..base + 4].copy_from_slice(&lf.actual);
            v[base + 4..base + 7].copy_from_slice(&lf.predicted);
        }
        v
    }

    pub fn from_values(v: &[f64; FEATURE_COLUMNS]) -> FeatureRow {
        let mut row = FeatureRow::default();
        for (l, lf) in row.lines.iter_mut().enumerate() {
            let base = l * 7;
            lf.fundamental = v[base];
            lf.actual.copy_from_slice(&v[base + 1..base + 4]);
            lf.predicted.copy_from_slice(&v[base + 4..base + 7]);
        }
        row
    }

    /// Row with actual values from a record and zero predictions.
    pub fn from_record(r: &AnalyzerRecord) -> FeatureRow {
        let mut row = FeatureRow::default();
        for l in Line::ALL {
            let m = r.line(l);
            row.lines[l.index()] = LineFeatures {
                fundamental: m.fundamental(),
                actual: m.harmonics(),
                predicted: [0.0; 3],
            };
        }
        row
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file, path)
    }

    pub fn parse<R: Read>(reader: R, source: &Path) -> Result<FeatureTable> {
        let schema = |msg: String| Error::Schema {
            path: source.to_path_buf(),
            message: msg,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = rdr.records();
        let header = match rows.next() {
            Some(h) => h.map_err(|e| schema(e.to_string()))?,
            None => return Err(schema("missing header".into())),
        };
        let expected = feature_header();
        if header.len() != FEATURE_COLUMNS || header.iter().zip(&expected).any(|(a, b)| a != b) {
            return Err(schema(format!(
                "expected the {FEATURE_COLUMNS}-column feature header, got {} columns",
                header.len()
            )));
        }
        let mut table = FeatureTable::default();
        for (i, row) in rows.enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| schema(format!("line {line}: {e}")))?;
            if row.len() != FEATURE_COLUMNS {
                return Err(schema(format!("line {line}: {} columns", row.len())));
            }
            let mut v = [0.0; FEATURE_COLUMNS];
            for (k, field) in row.iter().enumerate() {
                let x: f64 = field
                    .parse()
                    .map_err(|_| schema(format!("line {line}: bad value {field:?} in {}", expected[k])))?;
                if !(x.is_finite() && x >= 0.0) {
                    return Err(schema(format!(
                        "line {line}: {} must be finite and >= 0, got {x}",
                        expected[k]
                    )));
                }
                v[k] = x;
            }
            table.rows.push(FeatureRow::from_values(&v));
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.emit(file).map_err(|e| Error::io(path, e))
    }

    pub fn emit<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(feature_header())?;
        for row in &self.rows {
            wtr.write_record(row.to_values().iter().map(|v| v.to_string()))?;
        }
        wtr.flush()
    }
}
