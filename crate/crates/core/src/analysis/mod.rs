//! Exploratory statistics and report files.

mod errors;
mod profile;
mod report;
mod stats;

pub use errors::{error_summary, nearest_rank, ErrorSummary, Histogram, HistogramBins};
pub use profile::{default_bands, time_of_day_profile, BandMean, DailyProfile, Metric, TimeBand};
pub use report::{emit_report, file_stem, ReportBundle, Scatter};
pub use stats::{autocorrelation, pearson, AcfResult};
