use std::fmt;

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Analyzer logging cadence in seconds.
pub const SAMPLE_PERIOD_S: i64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Line {
    L1,
    L2,
    L3,
}

impl Line {
    pub const ALL: [Line; 3] = [Line::L1, Line::L2, Line::L3];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based line number as printed on the analyzer.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u32) -> Result<Line> {
        match n {
            1 => Ok(Line::L1),
            2 => Ok(Line::L2),
            3 => Ok(Line::L3),
            _ => Err(Error::invalid(format!("unknown line {n} (expected 1, 2 or 3)"))),
        }
    }
}

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.number())
    }
}

/// The three harmonic orders that are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HarmonicOrder {
    Third,
    Fifth,
    Seventh,
}

impl HarmonicOrder {
    pub const ALL: [HarmonicOrder; 3] = [
        HarmonicOrder::Third,
        HarmonicOrder::Fifth,
        HarmonicOrder::Seventh,
    ];

    pub fn order(self) -> u32 {
        match self {
            HarmonicOrder::Third => 3,
            HarmonicOrder::Fifth => 5,
            HarmonicOrder::Seventh => 7,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_order(n: u32) -> Result<HarmonicOrder> {
        match n {
            3 => Ok(HarmonicOrder::Third),
            5 => Ok(HarmonicOrder::Fifth),
            7 => Ok(HarmonicOrder::Seventh),
            _ => Err(Error::invalid(format!(
                "unsupported harmonic order {n} (expected 3, 5 or 7)"
            ))),
        }
    }
}

impl fmt::Display for HarmonicOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.order())
    }
}

/// One line's readings in a 30 s analyzer sample. Currents and harmonic
/// magnitudes are RMS amperes; `current` includes all harmonic content.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineMeasurement {
    pub voltage: f64,
    pub current: f64,
    pub thd_i: f64,
    pub active_power: f64,
    pub reactive_power: f64,
    pub power_factor: f64,
    pub h3: f64,
    pub h5: f64,
    pub h7: f64,
}

impl LineMeasurement {
    pub fn harmonic(&self, order: HarmonicOrder) -> f64 {
        match order {
            HarmonicOrder::Third => self.h3,
            HarmonicOrder::Fifth => self.h5,
            HarmonicOrder::Seventh => self.h7,
        }
    }

    pub fn harmonics(&self) -> [f64; 3] {
        [self.h3, self.h5, self.h7]
    }

    /// Fundamental current recovered from the total RMS current.
    pub fn fundamental(&self) -> f64 {
        let harmonic_sq = self.h3 * self.h3 + self.h5 * self.h5 + self.h7 * self.h7;
        (self.current * self.current - harmonic_sq).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzerRecord {
    /// Seconds since the epoch, analyzer local time.
    pub timestamp: i64,
    pub frequency: f64,
    pub lines: [LineMeasurement; 3],
}

impl AnalyzerRecord {
    pub fn line(&self, line: Line) -> &LineMeasurement {
        &self.lines[line.index()]
    }

    pub fn seconds_of_day(&self) -> i64 {
        self.timestamp.rem_euclid(SECONDS_PER_DAY)
    }

    pub fn hour_of_day(&self) -> f64 {
        self.seconds_of_day() as f64 / 3600.0
    }
}
