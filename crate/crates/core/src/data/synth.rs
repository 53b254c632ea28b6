//! Synthetic analyzer logs.
//!
//! Each line carries a linear load and a harmonic-producing (non-linear)
//! load. Both follow a daily profile with morning and evening peaks; the
//! non-linear part peaks harder, so THDi is higher at those times than in the
//! afternoon. Slow mean-reverting (Ornstein-Uhlenbeck) factors modulate the
//! load level and the harmonic emission, and a weekly cycle shifts emission
//! between working days and the weekend. The 5th and 7th share one emission
//! factor while the 3rd has its own, which makes h5/h7 the most correlated pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::record::{AnalyzerRecord, LineMeasurement, SAMPLE_PERIOD_S, SECONDS_PER_DAY};
use crate::error::{Error, Result};

pub const SAMPLES_PER_DAY: usize = (SECONDS_PER_DAY / SAMPLE_PERIOD_S) as usize;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    /// Timestamp of the first sample; should be a local midnight.
    pub start_timestamp: i64,
    /// Linear load scale per line (A).
    pub base_current: [f64; 3],
    /// Non-linear load scale relative to the linear one, per line.
    pub nonlinear_share: [f64; 3],
    pub morning_peak_hour: f64,
    pub evening_peak_hour: f64,
    /// Gaussian width (hours) of the daily peaks.
    pub peak_width_hours: f64,
    /// Harmonic magnitude per ampere of non-linear load, orders 3/5/7.
    pub emission: [f64; 3],
    /// Correlation time (samples) and std of the load-level factor.
    pub load_corr_samples: f64,
    pub load_std: f64,
    /// Correlation time (samples) and std of the harmonic emission factors.
    pub emission_corr_samples: f64,
    pub emission_std: f64,
    /// Amplitude of the weekly log-emission cycle.
    pub weekly_swing: f64,
    /// Std of per-sample multiplicative measurement noise.
    pub noise_std: f64,
    pub nominal_voltage: f64,
    pub nominal_frequency: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            // 2023-05-21 00:00
            start_timestamp: 1_684_627_200,
            base_current: [40.0, 30.0, 35.0],
            nonlinear_share: [0.5, 0.6, 0.45],
            morning_peak_hour: 7.5,
            evening_peak_hour: 19.5,
            peak_width_hours: 3.0,
            emission: [0.40, 0.16, 0.07],
            load_corr_samples: 4_000.0,
            load_std: 0.05,
            emission_corr_samples: 6_000.0,
            emission_std: 0.12,
            weekly_swing: 0.6,
            noise_std: 0.004,
            nominal_voltage: 230.0,
            nominal_frequency: 50.0,
        }
    }
}

/// Discrete Ornstein-Uhlenbeck process with stationary start, clamped to
/// `±clamp` so multiplicative factors stay bounded.
struct MeanReverting {
    phi: f64,
    innovation: f64,
    clamp: f64,
    state: f64,
}

impl MeanReverting {
    fn new(corr_samples: f64, std: f64, clamp: f64, rng: &mut ChaCha8Rng) -> Self {
        let phi = (-1.0 / corr_samples.max(1e-9)).exp();
        let z: f64 = rng.sample(StandardNormal);
        MeanReverting {
            phi,
            innovation: std * (1.0 - phi * phi).sqrt(),
            clamp,
            state: std * z,
        }
    }

    fn value(&self) -> f64 {
        self.state.clamp(-self.clamp, self.clamp)
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) {
        let z: f64 = rng.sample(StandardNormal);
        self.state = self.phi * self.state + self.innovation * z;
    }
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    // circular distance on the 24 h clock
    let mut d = (hour - centre).rem_euclid(24.0);
    if d > 12.0 {
        d = 24.0 - d;
    }
    (-d * d / (2.0 * width * width)).exp()
}

fn linear_profile(hour: f64, p: &ProfileConfig) -> f64 {
    0.6 + 0.2 * bump(hour, p.morning_peak_hour + 0.5, 3.0) + 0.24 * bump(hour, p.evening_peak_hour + 0.5, 3.0)
}

fn nonlinear_profile(hour: f64, p: &ProfileConfig) -> f64 {
    0.3 + 0.8 * bump(hour, p.morning_peak_hour, p.peak_width_hours)
        + 1.0 * bump(hour, p.evening_peak_hour, p.peak_width_hours)
}

fn noise(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (std * z).clamp(-3.0 * std, 3.0 * std)
}

struct LineState {
    load: MeanReverting,
    third: MeanReverting,
    fifth_seventh: MeanReverting,
    fifth: MeanReverting,
    seventh: MeanReverting,
    weekly_phase: f64,
}

/// `2880·days` records at 30 s cadence; identical output for identical seed.
pub fn generate_synthetic(days: u32, seed: u64, profile: &ProfileConfig) -> Result<Vec<AnalyzerRecord>> {
    if days == 0 {
        return Err(Error::invalid("days must be >= 1"));
    }
    let p = profile;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines: Vec<LineState> = (0..3)
        .map(|_| LineState {
            load: MeanReverting::new(p.load_corr_samples, p.load_std, 4.0 * p.load_std, &mut rng),
            third: MeanReverting::new(p.emission_corr_samples, p.emission_std, 2.5 * p.emission_std, &mut rng),
            fifth_seventh: MeanReverting::new(p.emission_corr_samples, p.emission_std, 2.5 * p.emission_std, &mut rng),
            fifth: MeanReverting::new(600.0, 0.02, 0.05, &mut rng),
            seventh: MeanReverting::new(600.0, 0.02, 0.05, &mut rng),
            weekly_phase: rng.gen_range(0.0..std::f64::consts::TAU),
        })
        .collect();
    let mut freq = MeanReverting::new(60.0, 0.03, 0.2, &mut rng);

    let n = days as usize * SAMPLES_PER_DAY;
    let mut records = Vec::with_capacity(n);
    for k in 0..n {
        let timestamp = p.start_timestamp + k as i64 * SAMPLE_PERIOD_S;
        let hour = timestamp.rem_euclid(SECONDS_PER_DAY) as f64 / 3600.0;
        let mut measurements = [LineMeasurement::default(); 3];
        for (l, st) in lines.iter_mut().enumerate() {
            let level = st.load.value().exp();
            let linear = p.base_current[l] * linear_profile(hour, p) * level;
            let nonlinear =
                p.base_current[l] * p.nonlinear_share[l] * nonlinear_profile(hour, p) * level;
            let fundamental = (linear + nonlinear) * (1.0 + noise(&mut rng, p.noise_std));

            let weekly = p.weekly_swing
                * (std::f64::consts::TAU * k as f64 / (7 * SAMPLES_PER_DAY) as f64 + st.weekly_phase).sin();
            let shared = st.fifth_seventh.value() + weekly;
            let h3 = p.emission[0]
                * nonlinear
                * (st.third.value() + weekly + noise(&mut rng, p.noise_std)).exp();
            let h5 = p.emission[1]
                * nonlinear
                * (shared + st.fifth.value() + noise(&mut rng, p.noise_std)).exp();
            let h7 = p.emission[2]
                * nonlinear
                * (shared + st.seventh.value() + noise(&mut rng, p.noise_std)).exp();

            let harmonic_sq = h3 * h3 + h5 * h5 + h7 * h7;
            let current = (fundamental * fundamental + harmonic_sq).sqrt();
            let thd_i = harmonic_sq.sqrt() / fundamental * 100.0;
            let distortion_share = nonlinear / (linear + nonlinear);
            let power_factor = (0.96 - 0.12 * distortion_share).clamp(0.0, 1.0);
            let voltage = p.nominal_voltage - 0.05 * current + noise(&mut rng, 0.5);
            let apparent = voltage * current;
            measurements[l] = LineMeasurement {
                voltage,
                current,
                thd_i,
                active_power: apparent * power_factor,
                reactive_power: apparent * (1.0 - power_factor * power_factor).sqrt(),
                power_factor,
                h3,
                h5,
                h7,
            };

            st.load.step(&mut rng);
            st.third.step(&mut rng);
            st.fifth_seventh.step(&mut rng);
            st.fifth.step(&mut rng);
            st.seventh.step(&mut rng);
        }
        records.push(AnalyzerRecord {
            timestamp,
            frequency: p.nominal_frequency + freq.value(),
            lines: measurements,
        });
        freq.step(&mut rng);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let p = ProfileConfig::default();
        let a = generate_synthetic(1, 7, &p).unwrap();
        let b = generate_synthetic(1, 7, &p).unwrap();
        assert_eq!(a.len(), 2880);
        assert_eq!(a, b);
        let c = generate_synthetic(1, 8, &p).unwrap();
        assert_ne!(a, c);
        assert!(generate_synthetic(0, 7, &p).is_err());
    }

    #[test]
    fn cadence_and_ordering() {
        let recs = generate_synthetic(1, 1, &ProfileConfig::default()).unwrap();
        for w in recs.windows(2) {
            assert_eq!(w[1].timestamp - w[0].timestamp, 30);
        }
        for r in &recs {
            for m in &r.lines {
                assert!(m.h3 > m.h5 && m.h5 > m.h7 && m.h7 > 0.0);
                assert!((0.0..=1.0).contains(&m.power_factor));
                assert!(m.current > 1.0);
            }
            assert!((45.0..=55.0).contains(&r.frequency));
        }
    }

    #[test]
    fn daily_shape_and_persistence_over_seeds() {
        use crate::analysis::{autocorrelation, default_bands, pearson, time_of_day_profile, Metric};
        use crate::data::Line;
        for seed in 0..20 {
            let recs = generate_synthetic(7, seed, &ProfileConfig::default()).unwrap();
            let p = time_of_day_profile(&recs, Metric::ThdI(Line::L1), &default_bands()).unwrap();
            let (m, a, e) = (p.bands[0].mean, p.bands[1].mean, p.bands[2].mean);
            assert!(m > a && e > a, "seed {seed}: {m} {a} {e}");

            // 06-09 and 18-21 against 12-15
            let (mut peak, mut np, mut mid, mut nm) = (0.0, 0, 0.0, 0);
            for r in &recs {
                let h = r.hour_of_day();
                if (6.0..9.0).contains(&h) || (18.0..21.0).contains(&h) {
                    peak += r.lines[0].thd_i;
                    np += 1;
                } else if (12.0..15.0).contains(&h) {
                    mid += r.lines[0].thd_i;
                    nm += 1;
                }
            }
            assert!(peak / np as f64 > mid / nm as f64);

            let h3: Vec<f64> = recs.iter().map(|r| r.lines[0].h3).collect();
            let h5: Vec<f64> = recs.iter().map(|r| r.lines[0].h5).collect();
            let h7: Vec<f64> = recs.iter().map(|r| r.lines[0].h7).collect();
            let acf = autocorrelation(&h3, 200).unwrap();
            assert!(acf.coefficients.iter().all(|&r| r > 0.8), "seed {seed}");
            assert!(pearson(&h5, &h7).unwrap() > pearson(&h3, &h7).unwrap());
        }
    }
}
