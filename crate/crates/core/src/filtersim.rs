//! Shunt active-filter simulation with a hysteresis-band current source.
//!
//! The load draws its fundamental plus the actual 3rd/5th/7th harmonics. The
//! filter injects a current that tracks the inverted sum of the *predicted*
//! harmonics, so what survives at the point of common coupling is the
//! prediction error plus the relay's switching ripple.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::features::FeatureTable;
use crate::data::{HarmonicOrder, Line};
use crate::error::{Error, Result};
use crate::signal::{
    extract_harmonics, max_order_below_nyquist, synthesize, thd_total, HarmonicSpectrum, HarmonicTone, Tone,
    Waveform, DEFAULT_FUNDAMENTAL_HZ,
};
use crate::svg::{extent, Plot};

/// Highest order kept in [`SimResult::post_spectrum`].
pub const SPECTRUM_MAX_ORDER: u32 = 50;

pub const RESULTS_FILE: &str = "filter_results.csv";

pub const RESULTS_HEADER: &str =
    "case,line,act3,act5,act7,pred3,pred5,pred7,thd_pre_pct,thd_post_pct,thd_ideal_pct,flags";

/// One line of one feature-file row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCase {
    /// 1-based row number in the feature file.
    pub case: usize,
    pub line: Line,
    pub fundamental: f64,
    /// 3rd, 5th, 7th.
    pub actual: [f64; 3],
    pub predicted: [f64; 3],
}

impl FilterCase {
    pub fn is_runnable(&self) -> bool {
        self.fundamental.is_finite() && self.fundamental > 0.0
    }

    /// `√(Σ(actualᵢ − predictedᵢ)²) / fundamental · 100`: the THD left by a
    /// filter that injects the prediction perfectly.
    pub fn ideal_residual_thd(&self) -> Result<f64> {
        if !self.is_runnable() {
            return Err(unrunnable(self));
        }
        let sum_sq: f64 = self
            .actual
            .iter()
            .zip(&self.predicted)
            .map(|(a, p)| (a - p) * (a - p))
            .sum();
        Ok(sum_sq.sqrt() / self.fundamental * 100.0)
    }
}

fn unrunnable(case: &FilterCase) -> Error {
    Error::domain(format!(
        "case {} line {} has fundamental {}; nothing to filter",
        case.case,
        case.line.number(),
        case.fundamental
    ))
}

/// One case per row per line, in row order then line order.
pub fn cases_from_table(table: &FeatureTable) -> Vec<FilterCase> {
    let mut cases = Vec::with_capacity(table.rows.len() * 3);
    for (i, row) in table.rows.iter().enumerate() {
        for line in Line::ALL {
            let lf = row.lines[line.index()];
            cases.push(FilterCase {
                case: i + 1,
                line,
                fundamental: lf.fundamental,
                actual: lf.actual,
                predicted: lf.predicted,
            });
        }
    }
    cases
}

pub fn load_cases(path: impl AsRef<Path>) -> Result<Vec<FilterCase>> {
    Ok(cases_from_table(&FeatureTable::read_csv(path)?))
}

/// Hysteresis band half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// Fraction of the case fundamental.
    Relative(f64),
    /// Amperes.
    Absolute(f64),
}

impl Band {
    pub fn resolve(&self, fundamental: f64) -> f64 {
        match *self {
            Band::Relative(f) => f * fundamental,
            Band::Absolute(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseMode {
    /// Every harmonic starts at phase zero.
    Aligned,
    /// Uniform phases per case and order, shared by the actual and the
    /// predicted harmonic of that order.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sample_rate: f64,
    pub fundamental_freq: f64,
    pub cycles: u32,
    /// Leading cycles dropped before measuring THD.
    pub settle_cycles: u32,
    pub band: Band,
    /// Relay slew rate in A/s; `None` picks
    /// `1.5 · 2π·7·f₀ · max(Σ predicted, 0.1·fundamental)`.
    pub slew: Option<f64>,
    pub phases: PhaseMode,
    /// Waveform plots are rendered for at most this many cases.
    pub max_plots: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sample_rate: 100_000.0,
            fundamental_freq: DEFAULT_FUNDAMENTAL_HZ,
            cycles: 10,
            settle_cycles: 1,
            band: Band::Relative(0.02),
            slew: None,
            phases: PhaseMode::Aligned,
            max_plots: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if !(self.fundamental_freq.is_finite() && self.fundamental_freq > 0.0) {
            return bad(format!("fundamental must be positive, got {}", self.fundamental_freq));
        }
        let spc = self.sample_rate / self.fundamental_freq;
        if (spc - spc.round()).abs() > 1e-9 {
            return bad(format!("sample_rate / fundamental = {spc} is not a whole number of samples"));
        }
        if max_order_below_nyquist(self.sample_rate, self.fundamental_freq) < 7 {
            return bad(format!("sample_rate {} cannot represent the 7th harmonic", self.sample_rate));
        }
        if self.settle_cycles >= self.cycles {
            return bad(format!(
                "need more cycles ({}) than settle cycles ({})",
                self.cycles, self.settle_cycles
            ));
        }
        let band_ok = match self.band {
            Band::Relative(f) | Band::Absolute(f) => f.is_finite() && f > 0.0,
        };
        if !band_ok {
            return bad(format!("band must be positive, got {:?}", self.band));
        }
        if let Some(k) = self.slew {
            if !(k.is_finite() && k > 0.0) {
                return bad(format!("slew must be positive, got {k}"));
            }
        }
        Ok(())
    }

    pub fn slew_for(&self, case: &FilterCase) -> f64 {
        self.slew.unwrap_or_else(|| {
            let total: f64 = case.predicted.iter().sum();
            1.5 * 2.0 * PI * 7.0 * self.fundamental_freq * total.max(0.1 * case.fundamental)
        })
    }

    /// Phases of the 3rd, 5th and 7th harmonic for `case`.
    pub fn phases_for(&self, case: &FilterCase) -> [f64; 3] {
        match self.phases {
            PhaseMode::Aligned => [0.0; 3],
            PhaseMode::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(case.case as u64 * 3 + case.line.index() as u64);
                std::array::from_fn(|_| rng.gen_range(-PI..PI))
            }
        }
    }

    fn tones(&self, case: &FilterCase, magnitudes: &[f64; 3]) -> Vec<HarmonicTone> {
        let phases = self.phases_for(case);
        HarmonicOrder::ALL
            .iter()
            .zip(magnitudes.iter().zip(phases))
            .map(|(o, (&m, p))| HarmonicTone::new(o.order(), m, p))
            .collect()
    }
}

/// Fundamental plus the actual harmonics.
pub fn build_load_current(case: &FilterCase, cfg: &SimConfig) -> Result<Waveform> {
    if !case.is_runnable() {
        return Err(unrunnable(case));
    }
    synthesize(
        Tone::new(case.fundamental, 0.0),
        &cfg.tones(case, &case.actual),
        cfg.fundamental_freq,
        cfg.sample_rate,
        cfg.cycles,
    )
}

/// Negated sum of the predicted harmonics; no fundamental.
pub fn build_reference(case: &FilterCase, cfg: &SimConfig) -> Result<Waveform> {
    let predicted = synthesize(
        Tone::new(0.0, 0.0),
        &cfg.tones(case, &case.predicted),
        cfg.fundamental_freq,
        cfg.sample_rate,
        cfg.cycles,
    )?;
    Ok(predicted.negated())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    pub injected: Waveform,
    /// First sample whose tracking error is inside the band.
    pub band_entry: Option<usize>,
    /// Largest `|injected − reference|` from `band_entry` on.
    pub max_error_after_entry: f64,
    /// False when the reference moves faster than `slew · Δt` in some step.
    pub feasible: bool,
}

/// Two-state relay slewing at ±`slew`, flipping direction the instant the
/// tracking error reaches `±band`. Between samples the reference is taken as
/// linear and switching instants are solved exactly, so the relay behaves like
/// an analog comparator rather than a sampled one. Once the error is inside
/// the band it stays there whenever the reference moves slower than the relay.
pub fn hysteresis_track(reference: &Waveform, band: f64, slew: f64, initial: f64) -> Result<Tracking> {
    if !(band.is_finite() && band > 0.0) {
        return Err(Error::invalid(format!("band must be positive, got {band}")));
    }
    if !(slew.is_finite() && slew > 0.0) {
        return Err(Error::invalid(format!("slew must be positive, got {slew}")));
    }
    if !initial.is_finite() {
        return Err(Error::NonFinite("initial injected current".into()));
    }
    let r = &reference.samples;
    let dt = reference.dt();
    let mut out = Vec::with_capacity(r.len());
    let mut band_entry = None;
    let mut max_err: f64 = 0.0;
    let mut feasible = true;
    if let Some(&r0) = r.first() {
        let mut err = initial - r0;
        let mut dir = if err > 0.0 { -1.0 } else { 1.0 };
        // Rounding at the band edges is absorbed here.
        let tol = band * 1e-9;
        for k in 0..r.len() {
            if band_entry.is_none() && err.abs() <= band + tol {
                band_entry = Some(k);
            }
            if band_entry.is_some() {
                max_err = max_err.max(err.abs());
            }
            out.push(r[k] + err);
            if let Some(&next) = r.get(k + 1) {
                let v = (next - r[k]) / dt;
                feasible &= v.abs() <= slew;
                relay_interval(&mut err, &mut dir, band, slew, v, dt);
            }
        }
    }
    Ok(Tracking {
        injected: Waveform::new(out, reference.sample_rate, reference.fundamental_freq)?,
        band_entry,
        max_error_after_entry: max_err,
        feasible,
    })
}

/// Advances the error `err = injected − reference` by `span` seconds while the
/// reference moves at constant rate `v`.
fn relay_interval(err: &mut f64, dir: &mut f64, band: f64, slew: f64, v: f64, span: f64) {
    let mut left = span;
    let mut skipped = false;
    loop {
        let rate = *dir * slew - v;
        // The relay only ever turns back at the edge it is heading for.
        let hit = if *dir > 0.0 && rate > 0.0 {
            ((band - *err) / rate).max(0.0)
        } else if *dir < 0.0 && rate < 0.0 {
            ((-band - *err) / rate).max(0.0)
        } else {
            f64::INFINITY
        };
        if hit >= left {
            *err += rate * left;
            return;
        }
        left -= hit;
        *err = *dir * band;
        *dir = -*dir;
        if !skipped && v.abs() < slew {
            // From an edge the error runs a fixed triangle; drop whole periods.
            let period = 2.0 * band / (slew - v) + 2.0 * band / (slew + v);
            left %= period;
            skipped = true;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Flag {
    Unrunnable,
    InfeasibleSlew,
    NeverTracked,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Unrunnable => "unrunnable",
            Flag::InfeasibleSlew => "infeasible-slew",
            Flag::NeverTracked => "never-tracked",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub thd_pre: f64,
    pub thd_post: f64,
    pub thd_ideal: f64,
    pub band: f64,
    pub slew: f64,
    pub load: Waveform,
    pub injected: Waveform,
    /// `load + injected`.
    pub post: Waveform,
    /// Orders 1..=50 (or the Nyquist limit) of the settled post current.
    pub post_spectrum: HarmonicSpectrum,
    pub flags: Vec<Flag>,
}

/// Simulates one case. THD counts all non-fundamental content of the settled
/// cycles, so switching ripple shows up in the post-filter figure.
pub fn run_case(case: &FilterCase, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let load = build_load_current(case, cfg)?;
    let reference = build_reference(case, cfg)?;
    let band = cfg.band.resolve(case.fundamental);
    let slew = cfg.slew_for(case);
    let track = hysteresis_track(&reference, band, slew, 0.0)?;
    let post = load.add(&track.injected)?;
    let measured = (cfg.cycles - cfg.settle_cycles) as usize;
    let settle = cfg.settle_cycles as usize;
    let load_tail = load.cycles_window(settle, measured)?;
    let post_tail = post.cycles_window(settle, measured)?;
    let orders = SPECTRUM_MAX_ORDER.min(max_order_below_nyquist(cfg.sample_rate, cfg.fundamental_freq));
    let mut flags = Vec::new();
    if !track.feasible {
        flags.push(Flag::InfeasibleSlew);
    }
    if track.band_entry.is_none() {
        flags.push(Flag::NeverTracked);
    }
    Ok(SimResult {
        thd_pre: thd_total(&load_tail)?,
        thd_post: thd_total(&post_tail)?,
        thd_ideal: case.ideal_residual_thd()?,
        band,
        slew,
        post_spectrum: extract_harmonics(&post_tail, orders)?,
        load,
        injected: track.injected,
        post,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseThd {
    pub pre: f64,
    pub post: f64,
    pub ideal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub case: FilterCase,
    /// `None` for unrunnable cases.
    pub thd: Option<CaseThd>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    /// `(file name, svg)` pairs.
    pub plots: Vec<(String, String)>,
}

/// Runs every case in order. Unrunnable cases are reported with a flag
/// instead of aborting the suite.
pub fn run_suite(cases: &[FilterCase], cfg: &SimConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let mut report = SuiteReport::default();
    for case in cases {
        if !case.is_runnable() {
            report.rows.push(SuiteRow {
                case: *case,
                thd: None,
                flags: vec![Flag::Unrunnable],
            });
            continue;
        }
        let res = run_case(case, cfg)?;
        if report.plots.len() < cfg.max_plots {
            report.plots.push((
                format!("case{}_L{}.svg", case.case, case.line.number()),
                waveform_plot(case, &res, cfg),
            ));
        }
        report.rows.push(SuiteRow {
            case: *case,
            thd: Some(CaseThd {
                pre: res.thd_pre,
                post: res.thd_post,
                ideal: res.thd_ideal,
            }),
            flags: res.flags,
        });
    }
    Ok(report)
}

/// Final two cycles of the load current before and after compensation.
fn waveform_plot(case: &FilterCase, res: &SimResult, cfg: &SimConfig) -> String {
    let shown = 2.min(cfg.cycles) as usize;
    let start = cfg.cycles as usize - shown;
    let pre = res.load.cycles_window(start, shown).expect("window inside simulated span");
    let post = res.post.cycles_window(start, shown).expect("window inside simulated span");
    let stride = (pre.len() / 800).max(1);
    let ms = 1000.0 / cfg.sample_rate;
    let pts = |w: &Waveform| -> Vec<(f64, f64)> {
        w.samples
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(k, &v)| (k as f64 * ms, v))
            .collect()
    };
    let (lo, hi) = extent(pre.samples.iter().chain(&post.samples).copied());
    let mut plot = Plot::new(
        &format!(
            "Case {} line {}: THD {:.2}% before, {:.2}% after",
            case.case,
            case.line.number(),
            res.thd_pre,
            res.thd_post
        ),
        "time (ms)",
        "current (A)",
        (0.0, pre.len() as f64 * ms),
        (lo, hi),
    );
    plot.polyline(&pts(&pre), "#d4a017");
    plot.polyline(&pts(&post), "#1f5fbf");
    plot.finish()
}

impl SuiteReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(RESULTS_HEADER);
        s.push('\n');
        for row in &self.rows {
            let c = &row.case;
            let _ = write!(s, "{},{}", c.case, c.line.number());
            for v in c.actual.iter().chain(&c.predicted) {
                let _ = write!(s, ",{v}");
            }
            match row.thd {
                Some(t) => {
                    let _ = write!(s, ",{:.4},{:.4},{:.4}", t.pre, t.post, t.ideal);
                }
                None => s.push_str(",,,"),
            }
            let flags: Vec<&str> = row.flags.iter().map(Flag::as_str).collect();
            let _ = writeln!(s, ",{}", flags.join(";"));
        }
        s
    }

    /// Writes the results CSV and the waveform plots into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(self.plots.len() + 1);
        let mut put = |name: &str, body: &str| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put(RESULTS_FILE, &self.to_csv())?;
        for (name, svg) in &self.plots {
            put(name, svg)?;
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::features::{FeatureRow, LineFeatures};
    use crate::signal::{thd, HarmonicSpectrum};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn case(fundamental: f64, actual: [f64; 3], predicted: [f64; 3]) -> FilterCase {
        FilterCase {
            case: 1,
            line: Line::L1,
            fundamental,
            actual,
            predicted,
        }
    }

    fn case1() -> FilterCase {
        case(26.81, [3.71, 1.39, 0.69], [3.78, 1.37, 0.68])
    }

    fn reference_cases() -> Vec<FilterCase> {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_cases.csv");
        load_cases(path).unwrap().into_iter().filter(|c| c.line == Line::L1).collect()
    }

    /// THD from the closed form on magnitudes alone.
    fn thd_formula(fund: f64, h: [f64; 3]) -> f64 {
        let s = HarmonicSpectrum::from_magnitudes(fund, &[(3, h[0]), (5, h[1]), (7, h[2])]).unwrap();
        thd(&s).unwrap()
    }

    #[test]
    fn fixture_expands_to_three_lines_per_row() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_cases.csv");
        let all = load_cases(path).unwrap();
        assert_eq!(all.len(), 30);
        assert_eq!(all.iter().filter(|c| c.is_runnable()).count(), 10);
        assert_eq!((all[3].case, all[3].line), (2, Line::L1));
    }

    #[test]
    fn zero_fundamental_is_kept_and_flagged() {
        let mut row = FeatureRow::default();
        row.lines[0] = LineFeatures {
            fundamental: 10.0,
            actual: [1.0, 0.5, 0.2],
            predicted: [1.0, 0.5, 0.2],
        };
        let cases = cases_from_table(&FeatureTable { rows: vec![row] });
        assert_eq!(cases.len(), 3);
        assert!(!cases[1].is_runnable());
        let report = run_suite(&cases, &SimConfig::default()).unwrap();
        assert_eq!(report.rows[1].flags, vec![Flag::Unrunnable]);
        assert!(report.rows[1].thd.is_none());
        assert!(report.to_csv().lines().nth(2).unwrap().ends_with(",,,unrunnable"));
        assert!(run_case(&cases[1], &SimConfig::default()).is_err());
    }

    #[test]
    fn feature_emitter_round_trip() {
        let mut table = FeatureTable::default();
        for k in 0..4 {
            let mut row = FeatureRow::default();
            for (l, lf) in row.lines.iter_mut().enumerate() {
                let b = (k * 3 + l) as f64;
                *lf = LineFeatures {
                    fundamental: 10.0 + b / 7.0,
                    actual: [b * 0.1, b * 0.03, 1.0 / (b + 3.0)],
                    predicted: [b * 0.11, 0.2, 0.0],
                };
            }
            table.rows.push(row);
        }
        let mut bytes = Vec::new();
        table.emit(&mut bytes).unwrap();
        let parsed = FeatureTable::parse(bytes.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(cases_from_table(&parsed), cases_from_table(&table));
    }

    #[test]
    fn load_current_thd_matches_reference_cases() {
        let cfg = SimConfig::default();
        let c1 = case1();
        let t1 = thd_total(&build_load_current(&c1, &cfg).unwrap()).unwrap();
        assert_abs_diff_eq!(t1, thd_formula(c1.fundamental, c1.actual), epsilon = 1e-9);
        assert!((t1 - 15.0).abs() <= 0.2, "{t1}");
        let c4 = case(20.121, [9.31, 2.57, 0.0], [9.49, 2.39, 0.01]);
        let t4 = thd_total(&build_load_current(&c4, &cfg).unwrap()).unwrap();
        assert!((t4 - 48.0).abs() <= 0.5, "{t4}");
        let pure = case(10.0, [0.0; 3], [0.0; 3]);
        assert!(thd_total(&build_load_current(&pure, &cfg).unwrap()).unwrap() < 1e-6);
    }

    #[test]
    fn reference_is_inverted_prediction() {
        let cfg = SimConfig::default();
        let zero = build_reference(&case(5.0, [1.0; 3], [0.0; 3]), &cfg).unwrap();
        assert!(zero.samples.iter().all(|&v| v == 0.0));
        let c = case1();
        let r = build_reference(&c, &cfg).unwrap();
        let p = synthesize(Tone::new(0.0, 0.0), &cfg.tones(&c, &c.predicted), 50.0, 1e5, 10).unwrap();
        assert!(r.add(&p).unwrap().samples.iter().all(|&v| v.abs() < 1e-12));
        let expected = (c.predicted.iter().map(|m| m * m).sum::<f64>() / 2.0).sqrt();
        assert_abs_diff_eq!(r.rms(), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(r.rms(), 2.8834, epsilon = 1e-4);
    }

    #[test]
    fn relay_on_zero_reference_stays_in_band() {
        let r = Waveform::zeros(5000, 1e5, 50.0).unwrap();
        for band in [1e-3, 0.05, 1.0] {
            let t = hysteresis_track(&r, band, 200.0, 0.0).unwrap();
            let bound = band + 200.0 * r.dt();
            assert_eq!(t.band_entry, Some(0));
            assert!(t.injected.samples.iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn relay_tracks_sine_within_bound() {
        let r = synthesize(Tone::new(1.0, 0.0), &[], 50.0, 1e5, 4).unwrap();
        let slew = 1.5 * 2.0 * PI * 50.0;
        let band = 0.02;
        let t = hysteresis_track(&r, band, slew, 0.0).unwrap();
        assert!(t.feasible);
        assert!(t.max_error_after_entry <= band + slew * r.dt());
        // starting far outside the band still converges
        let t = hysteresis_track(&r, band, slew, 3.0).unwrap();
        let entry = t.band_entry.unwrap();
        assert!(entry > 0);
        for k in entry..r.len() {
            assert!((t.injected.samples[k] - r.samples[k]).abs() <= band + slew * r.dt());
        }
    }

    #[test]
    fn slow_relay_is_flagged() {
        let cfg = SimConfig {
            slew: Some(10.0),
            ..SimConfig::default()
        };
        let res = run_case(&case1(), &cfg).unwrap();
        assert!(res.flags.contains(&Flag::InfeasibleSlew));
        assert!(run_case(&case1(), &SimConfig::default()).unwrap().flags.is_empty());
    }

    #[test]
    fn ideal_residual_case1() {
        assert_abs_diff_eq!(case1().ideal_residual_thd().unwrap(), 0.274, epsilon = 5e-4);
        let res = run_case(&case1(), &SimConfig::default()).unwrap();
        assert_abs_diff_eq!(res.thd_ideal, (0.07f64.powi(2) + 0.0004 + 0.0001).sqrt() / 26.81 * 100.0, epsilon = 1e-9);
    }

    #[test]
    fn every_reference_case_improves() {
        let cfg = SimConfig::default();
        let cases = reference_cases();
        assert_eq!(cases.len(), 10);
        for c in &cases {
            let r = run_case(c, &cfg).unwrap();
            assert!(r.thd_post < r.thd_pre, "case {}: {} -> {}", c.case, r.thd_pre, r.thd_post);
            assert!(r.thd_ideal <= r.thd_post, "case {}", c.case);
            assert!(r.flags.is_empty());
        }
    }

    #[test]
    fn perfect_prediction_with_tight_band_cancels() {
        for c in reference_cases() {
            let exact = FilterCase { predicted: c.actual, ..c };
            let cfg = SimConfig {
                band: Band::Relative(0.001),
                ..SimConfig::default()
            };
            let r = run_case(&exact, &cfg).unwrap();
            assert!(r.thd_post < 1.0, "case {}: {}", c.case, r.thd_post);
        }
    }

    #[test]
    fn tight_band_leaves_prediction_error_per_order() {
        let c = case(20.121, [9.31, 2.57, 0.0], [9.49, 2.39, 0.01]);
        let cfg = SimConfig {
            band: Band::Absolute(1e-3),
            ..SimConfig::default()
        };
        let r = run_case(&c, &cfg).unwrap();
        for (i, o) in HarmonicOrder::ALL.iter().enumerate() {
            let expect = (c.actual[i] - c.predicted[i]).abs();
            assert_abs_diff_eq!(r.post_spectrum.magnitude(o.order()), expect, epsilon = 2e-3);
        }
        assert!((r.post_spectrum.magnitude(1) / c.fundamental - 1.0).abs() < 0.01);
    }

    #[test]
    fn fundamental_is_preserved_at_default_band() {
        for c in reference_cases() {
            let r = run_case(&c, &SimConfig::default()).unwrap();
            assert!((r.post_spectrum.magnitude(1) / c.fundamental - 1.0).abs() < 0.01, "case {}", c.case);
        }
    }

    #[test]
    fn halving_the_band_shrinks_ripple() {
        for c in [case1(), reference_cases()[4]] {
            let mut prev = f64::INFINITY;
            for k in 0..6 {
                let cfg = SimConfig {
                    band: Band::Relative(0.04 / 2f64.powi(k)),
                    ..SimConfig::default()
                };
                let r = run_case(&c, &cfg).unwrap();
                let excess = r.thd_post - r.thd_ideal;
                assert!(excess >= 0.0 && excess < prev, "case {} step {k}: {excess} !< {prev}", c.case);
                prev = excess;
            }
        }
    }

    #[test]
    fn random_phases_keep_improvement() {
        let cfg = SimConfig {
            phases: PhaseMode::Random { seed: 11 },
            ..SimConfig::default()
        };
        for c in reference_cases() {
            let p = cfg.phases_for(&c);
            assert_ne!(p, [0.0; 3]);
            let r = run_case(&c, &cfg).unwrap();
            assert_abs_diff_eq!(r.thd_pre, thd_formula(c.fundamental, c.actual), epsilon = 1e-9);
            assert!(r.thd_post < r.thd_pre);
        }
    }

    #[test]
    fn empty_suite_is_header_only() {
        let report = run_suite(&[], &SimConfig::default()).unwrap();
        assert_eq!(report.to_csv(), format!("{RESULTS_HEADER}\n"));
        assert!(report.plots.is_empty());
    }

    #[test]
    fn suite_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cases = reference_cases();
        let a = run_suite(&cases, &SimConfig::default()).unwrap();
        let b = run_suite(&cases, &SimConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 10);
        assert_eq!(a.plots.len(), 10);
        let files = a.write(dir.path()).unwrap();
        assert_eq!(files.len(), 11);
        let csv = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(csv, b.to_csv());
        assert!(csv.lines().nth(1).unwrap().starts_with("1,1,3.71,1.39,0.69,3.78,1.37,0.68,14.99"));
    }

    #[test]
    fn bad_configs() {
        let bad = [
            SimConfig { band: Band::Absolute(0.0), ..SimConfig::default() },
            SimConfig { cycles: 1, ..SimConfig::default() },
            SimConfig { sample_rate: 333.0, ..SimConfig::default() },
            SimConfig { sample_rate: 12_345.6, ..SimConfig::default() },
            SimConfig { slew: Some(-1.0), ..SimConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn relay_bound_holds_for_feasible_slew(
            amp in 0.1f64..20.0,
            order in 2u32..8,
            band in 1e-3f64..1.0,
            margin in 1.01f64..4.0,
            initial in -30.0f64..30.0,
        ) {
            let r = synthesize(Tone::new(0.0, 0.0), &[HarmonicTone::new(order, amp, 0.3)], 50.0, 1e5, 3).unwrap();
            let slew = margin * 2.0 * PI * order as f64 * 50.0 * amp;
            let t = hysteresis_track(&r, band, slew, initial).unwrap();
            prop_assert!(t.feasible);
            prop_assert!(t.band_entry.is_some());
            prop_assert!(t.max_error_after_entry <= band + slew * r.dt() + 1e-12);
        }

        #[test]
        fn ideal_never_exceeds_post(
            fund in 5.0f64..40.0,
            a in prop::array::uniform3(0.0f64..5.0),
            d in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let p: [f64; 3] = std::array::from_fn(|i| (a[i] + d[i]).max(0.0));
            let r = run_case(&case(fund, a, p), &SimConfig::default()).unwrap();
            prop_assert!(r.thd_ideal <= r.thd_post);
        }
    }
}
