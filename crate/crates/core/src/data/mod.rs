//! Analyzer log ingestion, cleaning, synthetic generation and dataset
//! construction.

pub mod clean;
pub mod csv_io;
pub mod features;
pub mod record;
pub mod scaler;
pub mod split;
pub mod synth;
pub mod window;

pub use clean::{clean, CleanConfig, CleanOutcome, RemovalReason};
pub use csv_io::{ingest_csv, write_raw_csv, Ingested, RejectReason};
pub use features::{make_tabular_features, FeatureRow, FeatureTable, LineFeatures};
pub use record::{AnalyzerRecord, HarmonicOrder, Line, LineMeasurement};
pub use scaler::Scaler;
pub use split::{split, split_sizes, SplitFractions};
pub use synth::{generate_synthetic, ProfileConfig};
pub use window::{make_windows, WindowedDataset};

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn emit_ingest_round_trip(seed in 0u64..1000) {
            let mut p = ProfileConfig::default();
            p.start_timestamp += (seed as i64) * 30;
            let recs = generate_synthetic(1, seed, &p).unwrap();
            let recs = &recs[..200];
            let mut buf = Vec::new();
            csv_io::emit_raw_csv(&mut buf, recs).unwrap();
            let back = csv_io::parse_raw_csv(buf.as_slice(), std::path::Path::new("mem")).unwrap();
            prop_assert!(back.rejects.is_empty());
            prop_assert_eq!(back.records.as_slice(), recs);
        }
    }
}
