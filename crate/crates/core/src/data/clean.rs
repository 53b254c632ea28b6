use std::fmt;

use super::record::{AnalyzerRecord, Line};

#[derive(Debug, Clone, PartialEq)]
pub struct CleanConfig {
    /// All three line currents below this (A) counts as an outage.
    pub outage_threshold: f64,
    /// Modeled-line current below this (A) counts as extremely low loading.
    pub low_load_threshold: f64,
    pub modeled_line: Line,
    pub frequency_min: f64,
    pub frequency_max: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            outage_threshold: 0.1,
            low_load_threshold: 1.0,
            modeled_line: Line::L1,
            frequency_min: 45.0,
            frequency_max: 55.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalReason {
    Outage,
    EquipmentRange,
    LowLoad,
}

impl RemovalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalReason::Outage => "outage",
            RemovalReason::EquipmentRange => "equipment/range",
            RemovalReason::LowLoad => "low-load",
        }
    }
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Removed {
    pub record: AnalyzerRecord,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleanOutcome {
    pub kept: Vec<AnalyzerRecord>,
    pub removed: Vec<Removed>,
}

pub fn removal_reason(r: &AnalyzerRecord, cfg: &CleanConfig) -> Option<RemovalReason> {
    if r.lines.iter().all(|m| m.current < cfg.outage_threshold) {
        return Some(RemovalReason::Outage);
    }
    if !(cfg.frequency_min..=cfg.frequency_max).contains(&r.frequency) {
        return Some(RemovalReason::EquipmentRange);
    }
    if r.line(cfg.modeled_line).current < cfg.low_load_threshold {
        return Some(RemovalReason::LowLoad);
    }
    None
}

/// Drops outage, out-of-range and low-load rows; kept rows are untouched.
pub fn clean(records: Vec<AnalyzerRecord>, cfg: &CleanConfig) -> CleanOutcome {
    let mut out = CleanOutcome::default();
    for record in records {
        match removal_reason(&record, cfg) {
            Some(reason) => out.removed.push(Removed { record, reason }),
            None => out.kept.push(record),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::record::LineMeasurement;

    fn record(current: f64, frequency: f64) -> AnalyzerRecord {
        let m = LineMeasurement {
            voltage: 230.0,
            current,
            power_factor: 0.9,
            ..Default::default()
        };
        AnalyzerRecord {
            timestamp: 0,
            frequency,
            lines: [m; 3],
        }
    }

    #[test]
    fn reasons() {
        let cfg = CleanConfig::default();
        let out = clean(
            vec![record(0.0, 50.0), record(20.0, 60.2), record(20.0, 50.0), record(0.5, 50.0)],
            &cfg,
        );
        assert_eq!(out.kept, vec![record(20.0, 50.0)]);
        let reasons: Vec<_> = out.removed.iter().map(|r| r.reason.as_str()).collect();
        assert_eq!(reasons, ["outage", "equipment/range", "low-load"]);
    }

    #[test]
    fn low_load_only_checks_modeled_line() {
        let mut r = record(20.0, 50.0);
        r.lines[1].current = 0.2;
        let cfg = CleanConfig::default();
        assert_eq!(removal_reason(&r, &cfg), None);
        let cfg = CleanConfig {
            modeled_line: Line::L2,
            ..cfg
        };
        assert_eq!(removal_reason(&r, &cfg), Some(RemovalReason::LowLoad));
    }
}
