use std::fmt;

use crate::data::{AnalyzerRecord, HarmonicOrder, Line};
use crate::error::{Error, Result};

/// Half-open `[start_hour, end_hour)` window of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBand {
    pub name: String,
    pub start_hour: f64,
    pub end_hour: f64,
}

impl TimeBand {
    pub fn new(name: &str, start_hour: f64, end_hour: f64) -> TimeBand {
        TimeBand {
            name: name.to_string(),
            start_hour,
            end_hour,
        }
    }

    pub fn contains(&self, hour: f64) -> bool {
        hour >= self.start_hour && hour < self.end_hour
    }
}

pub fn default_bands() -> Vec<TimeBand> {
    vec![
        TimeBand::new("morning", 5.0, 10.0),
        TimeBand::new("afternoon", 12.0, 16.0),
        TimeBand::new("evening", 17.0, 22.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    ThdI(Line),
    Current(Line),
    Harmonic(Line, HarmonicOrder),
}

impl Metric {
    pub fn value(&self, r: &AnalyzerRecord) -> f64 {
        match *self {
            Metric::ThdI(l) => r.line(l).thd_i,
            Metric::Current(l) => r.line(l).current,
            Metric::Harmonic(l, o) => r.line(l).harmonic(o),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::ThdI(l) => write!(f, "thd_i_{l}"),
            Metric::Current(l) => write!(f, "current_{l}"),
            Metric::Harmonic(l, o) => write!(f, "{o}_{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandMean {
    pub band: TimeBand,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyProfile {
    pub metric: Metric,
    pub bands: Vec<BandMean>,
    /// Mean over every record, in or out of a band.
    pub overall_mean: f64,
}

impl DailyProfile {
    pub fn band(&self, name: &str) -> Option<&BandMean> {
        self.bands.iter().find(|b| b.band.name == name)
    }
}

/// Mean of `metric` per time-of-day band; every band must be populated.
pub fn time_of_day_profile(
    records: &[AnalyzerRecord],
    metric: Metric,
    bands: &[TimeBand],
) -> Result<DailyProfile> {
    if records.is_empty() {
        return Err(Error::invalid("profile of an empty record set"));
    }
    let mut sums = vec![(0.0, 0usize); bands.len()];
    let mut total = 0.0;
    for r in records {
        let v = metric.value(r);
        total += v;
        let hour = r.hour_of_day();
        for (band, acc) in bands.iter().zip(sums.iter_mut()) {
            if band.contains(hour) {
                acc.0 += v;
                acc.1 += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(bands.len());
    for (band, (sum, count)) in bands.iter().zip(sums) {
        if count == 0 {
            return Err(Error::invalid(format!("time band '{}' has no records", band.name)));
        }
        out.push(BandMean {
            band: band.clone(),
            mean: sum / count as f64,
            count,
        });
    }
    Ok(DailyProfile {
        metric,
        bands: out,
        overall_mean: total / records.len() as f64,
    })
}
