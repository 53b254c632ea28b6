//! Waveform synthesis, harmonic extraction and distortion metrics.
//!
//! All sinusoids use the sine convention `m * sin(2π·n·f₀·t + φ)`, so a
//! [`HarmonicSpectrum`] produced by [`extract_harmonics`] can be fed straight
//! back into [`synthesize`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_FUNDAMENTAL_HZ: f64 = 50.0;

/// Default highest order extracted from a waveform.
pub const DEFAULT_MAX_ORDER: u32 = 7;

/// Allowed deviation of `len·f₀/fs` from an integer cycle count.
const CYCLE_TOLERANCE: f64 = 1e-6;

/// Magnitude and phase (radians) of one sinusoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub magnitude: f64,
    pub phase: f64,
}

impl Tone {
    pub fn new(magnitude: f64, phase: f64) -> Self {
        Tone { magnitude, phase }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicTone {
    pub order: u32,
    pub magnitude: f64,
    pub phase: f64,
}

impl HarmonicTone {
    pub fn new(order: u32, magnitude: f64, phase: f64) -> Self {
        HarmonicTone {
            order,
            magnitude,
            phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub fundamental_freq: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64, fundamental_freq: f64) -> Result<Self> {
        check_rates(sample_rate, fundamental_freq)?;
        Ok(Waveform {
            samples,
            sample_rate,
            fundamental_freq,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64, fundamental_freq: f64) -> Result<Self> {
        Waveform::new(vec![0.0; len], sample_rate, fundamental_freq)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Number of fundamental cycles covered (possibly fractional).
    pub fn cycles(&self) -> f64 {
        self.samples.len() as f64 * self.fundamental_freq / self.sample_rate
    }

    pub fn samples_per_cycle(&self) -> f64 {
        self.sample_rate / self.fundamental_freq
    }

    /// Highest harmonic order strictly below the Nyquist frequency.
    pub fn max_resolvable_order(&self) -> u32 {
        max_order_below_nyquist(self.sample_rate, self.fundamental_freq)
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum_sq: f64 = self.samples.iter().map(|x| x * x).sum();
        (sum_sq / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// Sub-waveform covering `count` whole cycles starting at cycle `start`.
    ///
    /// Requires an integer number of samples per cycle.
    pub fn cycles_window(&self, start: usize, count: usize) -> Result<Waveform> {
        let spc = self.samples_per_cycle();
        let spc_int = spc.round();
        if (spc - spc_int).abs() > CYCLE_TOLERANCE || spc_int < 1.0 {
            return Err(Error::invalid(format!(
                "cycle windows need an integer number of samples per cycle, got {spc}"
            )));
        }
        let spc = spc_int as usize;
        let begin = start * spc;
        let end = begin + count * spc;
        if count == 0 || end > self.samples.len() {
            return Err(Error::invalid(format!(
                "cycle window {start}+{count} exceeds waveform of {:.3} cycles",
                self.cycles()
            )));
        }
        Ok(Waveform {
            samples: self.samples[begin..end].to_vec(),
            sample_rate: self.sample_rate,
            fundamental_freq: self.fundamental_freq,
        })
    }

    /// Sample-wise sum of two waveforms on the same time grid.
    pub fn add(&self, other: &Waveform) -> Result<Waveform> {
        self.check_same_grid(other)?;
        Ok(Waveform {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            sample_rate: self.sample_rate,
            fundamental_freq: self.fundamental_freq,
        })
    }

    pub fn negated(&self) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|x| -x).collect(),
            sample_rate: self.sample_rate,
            fundamental_freq: self.fundamental_freq,
        }
    }

    fn check_same_grid(&self, other: &Waveform) -> Result<()> {
        if self.samples.len() != other.samples.len()
            || self.sample_rate != other.sample_rate
            || self.fundamental_freq != other.fundamental_freq
        {
            return Err(Error::shape(
                format!("{} samples at {} Hz", self.len(), self.sample_rate),
                format!("{} samples at {} Hz", other.len(), other.sample_rate),
            ));
        }
        Ok(())
    }
}

/// Per-order magnitude/phase decomposition. Order 1 lives only in the
/// `fundamental_*` fields; `components` holds orders ≥ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    pub fundamental_magnitude: f64,
    pub fundamental_phase: f64,
    pub components: BTreeMap<u32, Tone>,
}

impl HarmonicSpectrum {
    /// Spectrum from magnitudes only; phases default to zero.
    pub fn from_magnitudes(fundamental: f64, harmonics: &[(u32, f64)]) -> Result<Self> {
        let mut components = BTreeMap::new();
        for &(order, magnitude) in harmonics {
            if order < 2 {
                return Err(Error::invalid(format!("harmonic order {order} < 2")));
            }
            if !(magnitude.is_finite() && magnitude >= 0.0) {
                return Err(Error::invalid(format!(
                    "magnitude of order {order} must be finite and >= 0, got {magnitude}"
                )));
            }
            if components.insert(order, Tone::new(magnitude, 0.0)).is_some() {
                return Err(Error::invalid(format!("duplicate harmonic order {order}")));
            }
        }
        Ok(HarmonicSpectrum {
            fundamental_magnitude: fundamental,
            fundamental_phase: 0.0,
            components,
        })
    }

    /// Magnitude at `order`; zero when the order is absent.
    pub fn magnitude(&self, order: u32) -> f64 {
        match order {
            1 => self.fundamental_magnitude,
            n => self.components.get(&n).map_or(0.0, |t| t.magnitude),
        }
    }

    pub fn phase(&self, order: u32) -> f64 {
        match order {
            1 => self.fundamental_phase,
            n => self.components.get(&n).map_or(0.0, |t| t.phase),
        }
    }

    pub fn scaled(&self, factor: f64) -> HarmonicSpectrum {
        HarmonicSpectrum {
            fundamental_magnitude: self.fundamental_magnitude * factor,
            fundamental_phase: self.fundamental_phase,
            components: self
                .components
                .iter()
                .map(|(&n, t)| (n, Tone::new(t.magnitude * factor, t.phase)))
                .collect(),
        }
    }

    pub fn harmonic_tones(&self) -> Vec<HarmonicTone> {
        self.components
            .iter()
            .map(|(&n, t)| HarmonicTone::new(n, t.magnitude, t.phase))
            .collect()
    }
}

fn check_rates(sample_rate: f64, fundamental_freq: f64) -> Result<()> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    if !(fundamental_freq.is_finite() && fundamental_freq > 0.0) {
        return Err(Error::invalid(format!(
            "fundamental frequency must be positive, got {fundamental_freq}"
        )));
    }
    Ok(())
}

pub fn max_order_below_nyquist(sample_rate: f64, fundamental_freq: f64) -> u32 {
    let ratio = sample_rate / (2.0 * fundamental_freq);
    let mut n = ratio.floor() as u32;
    while n > 0 && n as f64 * fundamental_freq >= sample_rate / 2.0 {
        n -= 1;
    }
    n
}

fn check_nyquist(order: u32, fundamental_freq: f64, sample_rate: f64) -> Result<()> {
    if order as f64 * fundamental_freq >= sample_rate / 2.0 {
        return Err(Error::invalid(format!(
            "order {order} at {fundamental_freq} Hz violates Nyquist for {sample_rate} Hz sampling"
        )));
    }
    Ok(())
}

/// Samples `Σ mᵢ·sin(2π·nᵢ·f₀·t + φᵢ)` over `cycles` fundamental periods,
/// fundamental included.
pub fn synthesize(
    fundamental: Tone,
    harmonics: &[HarmonicTone],
    fundamental_freq: f64,
    sample_rate: f64,
    cycles: u32,
) -> Result<Waveform> {
    check_rates(sample_rate, fundamental_freq)?;
    if cycles == 0 {
        return Err(Error::invalid("cycles must be >= 1"));
    }
    let mut tones = Vec::with_capacity(harmonics.len() + 1);
    tones.push(HarmonicTone::new(1, fundamental.magnitude, fundamental.phase));
    for h in harmonics {
        if h.order < 2 {
            return Err(Error::invalid(format!("harmonic order {} < 2", h.order)));
        }
        if tones.iter().any(|t| t.order == h.order) {
            return Err(Error::invalid(format!("duplicate harmonic order {}", h.order)));
        }
        tones.push(*h);
    }
    let highest = tones.iter().map(|t| t.order).max().unwrap_or(1);
    check_nyquist(highest, fundamental_freq, sample_rate)?;

    let len = (cycles as f64 * sample_rate / fundamental_freq).round() as usize;
    let omega = 2.0 * PI * fundamental_freq / sample_rate;
    let samples = (0..len)
        .map(|k| {
            let base = omega * k as f64;
            tones
                .iter()
                .map(|t| t.magnitude * (t.order as f64 * base + t.phase).sin())
                .sum()
        })
        .collect();
    Ok(Waveform {
        samples,
        sample_rate,
        fundamental_freq,
    })
}

/// Single-bin DFT at each harmonic order `1..=max_order`.
///
/// The window must hold an integer number of fundamental cycles, so every
/// harmonic falls exactly on a DFT bin and no windowing is needed.
pub fn extract_harmonics(w: &Waveform, max_order: u32) -> Result<HarmonicSpectrum> {
    check_rates(w.sample_rate, w.fundamental_freq)?;
    if max_order == 0 {
        return Err(Error::invalid("max_order must be >= 1"));
    }
    check_nyquist(max_order, w.fundamental_freq, w.sample_rate)?;
    let n = w.samples.len();
    let cycles = w.cycles();
    let whole = cycles.round();
    if whole < 1.0 || (cycles - whole).abs() > CYCLE_TOLERANCE {
        return Err(Error::invalid(format!(
            "waveform spans {cycles} cycles; extraction needs a whole number"
        )));
    }
    let whole = whole as usize;

    let twiddles: Vec<(f64, f64)> = (0..n)
        .map(|m| (2.0 * PI * m as f64 / n as f64).sin_cos())
        .collect();

    let mut spectrum = HarmonicSpectrum {
        fundamental_magnitude: 0.0,
        fundamental_phase: 0.0,
        components: BTreeMap::new(),
    };
    for order in 1..=max_order {
        let bin = order as usize * whole;
        let (mut re, mut im) = (0.0, 0.0);
        let mut idx = 0usize;
        for &x in &w.samples {
            let (s, c) = twiddles[idx];
            re += x * c;
            im -= x * s;
            idx += bin;
            if idx >= n {
                idx %= n;
            }
        }
        let magnitude = 2.0 * re.hypot(im) / n as f64;
        // X = N·m·e^{jφ}/(2j) for m·sin(ωt + φ)
        let phase = if re == 0.0 && im == 0.0 {
            0.0
        } else {
            wrap_phase(im.atan2(re) + PI / 2.0)
        };
        if order == 1 {
            spectrum.fundamental_magnitude = magnitude;
            spectrum.fundamental_phase = phase;
        } else {
            spectrum.components.insert(order, Tone::new(magnitude, phase));
        }
    }
    Ok(spectrum)
}

fn wrap_phase(phi: f64) -> f64 {
    let wrapped = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Total harmonic distortion in percent over every order the spectrum holds.
pub fn thd(s: &HarmonicSpectrum) -> Result<f64> {
    let fundamental = s.fundamental_magnitude;
    if !(fundamental.is_finite() && fundamental > 0.0) {
        return Err(Error::domain(format!(
            "THD undefined for fundamental magnitude {fundamental} (unloaded line)"
        )));
    }
    let sum_sq: f64 = s.components.values().map(|t| t.magnitude * t.magnitude).sum();
    Ok(sum_sq.sqrt() / fundamental * 100.0)
}

/// THD in percent counting everything that is not the fundamental: all
/// harmonics, interharmonics, switching ripple and DC. Uses the Parseval
/// identity `mean(x²) = m₁²/2 + rest`, so the window must span whole cycles.
pub fn thd_total(w: &Waveform) -> Result<f64> {
    let spectrum = extract_harmonics(w, 1)?;
    let fundamental = spectrum.fundamental_magnitude;
    if !(fundamental.is_finite() && fundamental > 0.0) {
        return Err(Error::domain(format!(
            "THD undefined for fundamental magnitude {fundamental} (unloaded line)"
        )));
    }
    let mean_sq = w.samples.iter().map(|x| x * x).sum::<f64>() / w.samples.len() as f64;
    let rest = (mean_sq - fundamental * fundamental / 2.0).max(0.0);
    Ok(rest.sqrt() / (fundamental / std::f64::consts::SQRT_2) * 100.0)
}

/// `|actual − predicted| / actual · 100`.
pub fn relative_error(actual: f64, predicted: f64) -> Result<f64> {
    if actual == 0.0 {
        return Err(Error::domain("relative error undefined for actual = 0"));
    }
    if !(actual.is_finite() && predicted.is_finite()) {
        return Err(Error::NonFinite("relative error input".into()));
    }
    Ok((actual - predicted).abs() / actual.abs() * 100.0)
}
