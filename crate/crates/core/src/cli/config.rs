//! Plain-text pipeline configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Unknown keys are
//! errors. [`PipelineConfig::dump`] lists every key with its resolved value,
//! and feeding a dump back in reproduces the same configuration.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::HistogramBins;
use crate::data::{CleanConfig, HarmonicOrder, Line, ProfileConfig, SplitFractions};
use crate::ensemble::{BoosterConfig, ForestConfig};
use crate::error::{Error, Result};
use crate::filtersim::{Band, PhaseMode, SimConfig};
use crate::train::AdamConfig;

use super::ModelChoice;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    /// Forest size per line.
    pub forest_estimators: [usize; 3],
    pub forest_max_depth: usize,
    pub forest_min_samples_leaf: usize,
    /// `None` uses a third of the features.
    pub forest_max_features: Option<usize>,
    pub booster_estimators: usize,
    pub booster_learning_rate: f64,
    pub booster_max_depth: usize,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings {
            forest_estimators: [100, 200, 100],
            forest_max_depth: 8,
            forest_min_samples_leaf: 1,
            forest_max_features: None,
            booster_estimators: 100,
            booster_learning_rate: 0.1,
            booster_max_depth: 3,
        }
    }
}

impl EnsembleSettings {
    pub fn forest(&self, line: Line, seed: u64) -> ForestConfig {
        ForestConfig {
            n_estimators: self.forest_estimators[line.index()],
            max_depth: self.forest_max_depth,
            min_samples_leaf: self.forest_min_samples_leaf,
            max_features: self.forest_max_features,
            bootstrap: true,
            seed,
        }
    }

    pub fn booster(&self, seed: u64) -> BoosterConfig {
        BoosterConfig {
            n_estimators: self.booster_estimators,
            learning_rate: self.booster_learning_rate,
            max_depth: self.booster_max_depth,
            min_samples_leaf: 1,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub model: ModelChoice,
    pub line: Line,
    pub order: HarmonicOrder,
    /// Raw analyzer CSV read by analyze, train and evaluate.
    pub raw_path: Option<PathBuf>,
    /// Feature CSV read by simulate.
    pub features_path: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub days: u32,
    pub window: usize,
    pub split: SplitFractions,
    /// Keep every n-th training and validation row.
    pub stride: usize,
    pub clean: CleanConfig,
    pub profile: ProfileConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub ensemble: EnsembleSettings,
    pub max_lag: usize,
    pub bins: HistogramBins,
    pub sim: SimConfig,
    /// Band half-width as a fraction of the fundamental, unless `band_amps` is set.
    pub band_fraction: f64,
    pub band_amps: Option<f64>,
    /// `None` simulates every line.
    pub sim_line: Option<Line>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            model: ModelChoice::LstmOnly,
            line: Line::L1,
            order: HarmonicOrder::Third,
            raw_path: None,
            features_path: None,
            checkpoints: Vec::new(),
            out: None,
            days: 7,
            window: 100,
            split: SplitFractions::default(),
            stride: 1,
            clean: CleanConfig::default(),
            profile: ProfileConfig::default(),
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig::default(),
            ensemble: EnsembleSettings::default(),
            max_lag: 200,
            bins: HistogramBins::default(),
            sim: SimConfig::default(),
            band_fraction: 0.02,
            band_amps: None,
            sim_line: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn triple<T: FromStr + Copy + Default>(key: &str, v: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("{key}: expected three comma-separated values, got {v:?}")));
    }
    let mut out = [T::default(); 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = num(key, p)?;
    }
    Ok(out)
}

fn show_triple<T: Display>(v: &[T; 3]) -> String {
    format!("{}, {}, {}", v[0], v[1], v[2])
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (v != "none").then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("none".into(), |p| p.display().to_string())
}

fn auto<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "auto" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn show_auto<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("auto".into(), |x| x.to_string())
}

fn line(key: &str, v: &str) -> Result<Line> {
    Line::from_number(num(key, v)?).map_err(|e| Error::Config(format!("{key}: {e}")))
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "seed" => self.seed = num(key, v)?,
            "model" => self.model = v.parse()?,
            "line" => self.line = line(key, v)?,
            "order" => {
                self.order = HarmonicOrder::from_order(num(key, v)?).map_err(|e| Error::Config(format!("{key}: {e}")))?
            }
            "paths.raw" => self.raw_path = opt_path(v),
            "paths.features" => self.features_path = opt_path(v),
            "paths.checkpoints" => {
                self.checkpoints = if v == "none" {
                    Vec::new()
                } else {
                    v.split(',').map(|p| PathBuf::from(p.trim())).collect()
                }
            }
            "paths.out" => self.out = opt_path(v),
            "data.days" => self.days = num(key, v)?,
            "data.window" => self.window = num(key, v)?,
            "data.train_fraction" => self.split.train = num(key, v)?,
            "data.val_fraction" => self.split.val = num(key, v)?,
            "data.test_fraction" => self.split.test = num(key, v)?,
            "data.stride" => self.stride = num(key, v)?,
            "clean.outage_threshold" => self.clean.outage_threshold = num(key, v)?,
            "clean.low_load_threshold" => self.clean.low_load_threshold = num(key, v)?,
            "clean.frequency_min" => self.clean.frequency_min = num(key, v)?,
            "clean.frequency_max" => self.clean.frequency_max = num(key, v)?,
            "synth.start_timestamp" => self.profile.start_timestamp = num(key, v)?,
            "synth.base_current" => self.profile.base_current = triple(key, v)?,
            "synth.nonlinear_share" => self.profile.nonlinear_share = triple(key, v)?,
            "synth.morning_peak_hour" => self.profile.morning_peak_hour = num(key, v)?,
            "synth.evening_peak_hour" => self.profile.evening_peak_hour = num(key, v)?,
            "synth.peak_width_hours" => self.profile.peak_width_hours = num(key, v)?,
            "synth.emission" => self.profile.emission = triple(key, v)?,
            "synth.load_corr_samples" => self.profile.load_corr_samples = num(key, v)?,
            "synth.load_std" => self.profile.load_std = num(key, v)?,
            "synth.emission_corr_samples" => self.profile.emission_corr_samples = num(key, v)?,
            "synth.emission_std" => self.profile.emission_std = num(key, v)?,
            "synth.weekly_swing" => self.profile.weekly_swing = num(key, v)?,
            "synth.noise_std" => self.profile.noise_std = num(key, v)?,
            "synth.nominal_voltage" => self.profile.nominal_voltage = num(key, v)?,
            "synth.nominal_frequency" => self.profile.nominal_frequency = num(key, v)?,
            "train.epochs" => self.epochs = num(key, v)?,
            "train.batch_size" => self.batch_size = num(key, v)?,
            "train.learning_rate" => self.adam.learning_rate = num(key, v)?,
            "train.beta1" => self.adam.beta1 = num(key, v)?,
            "train.beta2" => self.adam.beta2 = num(key, v)?,
            "train.epsilon" => self.adam.epsilon = num(key, v)?,
            "ensemble.forest_estimators" => self.ensemble.forest_estimators = triple(key, v)?,
            "ensemble.forest_max_depth" => self.ensemble.forest_max_depth = num(key, v)?,
            "ensemble.forest_min_samples_leaf" => self.ensemble.forest_min_samples_leaf = num(key, v)?,
            "ensemble.forest_max_features" => self.ensemble.forest_max_features = auto(key, v)?,
            "ensemble.booster_estimators" => self.ensemble.booster_estimators = num(key, v)?,
            "ensemble.booster_learning_rate" => self.ensemble.booster_learning_rate = num(key, v)?,
            "ensemble.booster_max_depth" => self.ensemble.booster_max_depth = num(key, v)?,
            "analysis.max_lag" => self.max_lag = num(key, v)?,
            "analysis.hist_width" => self.bins.width = num(key, v)?,
            "analysis.hist_bins" => self.bins.count = num(key, v)?,
            "sim.sample_rate" => self.sim.sample_rate = num(key, v)?,
            "sim.fundamental" => self.sim.fundamental_freq = num(key, v)?,
            "sim.cycles" => self.sim.cycles = num(key, v)?,
            "sim.settle_cycles" => self.sim.settle_cycles = num(key, v)?,
            "sim.band_fraction" => self.band_fraction = num(key, v)?,
            "sim.band_amps" => self.band_amps = auto(key, v)?,
            "sim.slew" => self.sim.slew = auto(key, v)?,
            "sim.phases" => {
                self.sim.phases = match v {
                    "aligned" => PhaseMode::Aligned,
                    "random" => PhaseMode::Random { seed: self.seed },
                    _ => return Err(Error::Config(format!("{key}: expected aligned or random, got {v:?}"))),
                }
            }
            "sim.max_plots" => self.sim.max_plots = num(key, v)?,
            "sim.line" => self.sim_line = if v == "all" { None } else { Some(line(key, v)?) },
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        self.sim.band = match self.band_amps {
            Some(a) => Band::Absolute(a),
            None => Band::Relative(self.band_fraction),
        };
        if let PhaseMode::Random { .. } = self.sim.phases {
            self.sim.phases = PhaseMode::Random { seed: self.seed };
        }
        self.clean.modeled_line = self.line;
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.profile;
        let e = &self.ensemble;
        let s = &self.sim;
        vec![
            ("seed", self.seed.to_string()),
            ("model", self.model.to_string()),
            ("line", self.line.number().to_string()),
            ("order", self.order.order().to_string()),
            ("paths.raw", show_path(&self.raw_path)),
            ("paths.features", show_path(&self.features_path)),
            (
                "paths.checkpoints",
                if self.checkpoints.is_empty() {
                    "none".into()
                } else {
                    self.checkpoints
                        .iter()
                        .map(|p| p.display().to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                },
            ),
            ("paths.out", show_path(&self.out)),
            ("data.days", self.days.to_string()),
            ("data.window", self.window.to_string()),
            ("data.train_fraction", self.split.train.to_string()),
            ("data.val_fraction", self.split.val.to_string()),
            ("data.test_fraction", self.split.test.to_string()),
            ("data.stride", self.stride.to_string()),
            ("clean.outage_threshold", self.clean.outage_threshold.to_string()),
            ("clean.low_load_threshold", self.clean.low_load_threshold.to_string()),
            ("clean.frequency_min", self.clean.frequency_min.to_string()),
            ("clean.frequency_max", self.clean.frequency_max.to_string()),
            ("synth.start_timestamp", p.start_timestamp.to_string()),
            ("synth.base_current", show_triple(&p.base_current)),
            ("synth.nonlinear_share", show_triple(&p.nonlinear_share)),
            ("synth.morning_peak_hour", p.morning_peak_hour.to_string()),
            ("synth.evening_peak_hour", p.evening_peak_hour.to_string()),
            ("synth.peak_width_hours", p.peak_width_hours.to_string()),
            ("synth.emission", show_triple(&p.emission)),
            ("synth.load_corr_samples", p.load_corr_samples.to_string()),
            ("synth.load_std", p.load_std.to_string()),
            ("synth.emission_corr_samples", p.emission_corr_samples.to_string()),
            ("synth.emission_std", p.emission_std.to_string()),
            ("synth.weekly_swing", p.weekly_swing.to_string()),
            ("synth.noise_std", p.noise_std.to_string()),
            ("synth.nominal_voltage", p.nominal_voltage.to_string()),
            ("synth.nominal_frequency", p.nominal_frequency.to_string()),
            ("train.epochs", self.epochs.to_string()),
            ("train.batch_size", self.batch_size.to_string()),
            ("train.learning_rate", self.adam.learning_rate.to_string()),
            ("train.beta1", self.adam.beta1.to_string()),
            ("train.beta2", self.adam.beta2.to_string()),
            ("train.epsilon", self.adam.epsilon.to_string()),
            ("ensemble.forest_estimators", show_triple(&e.forest_estimators)),
            ("ensemble.forest_max_depth", e.forest_max_depth.to_string()),
            ("ensemble.forest_min_samples_leaf", e.forest_min_samples_leaf.to_string()),
            ("ensemble.forest_max_features", show_auto(&e.forest_max_features)),
            ("ensemble.booster_estimators", e.booster_estimators.to_string()),
            ("ensemble.booster_learning_rate", e.booster_learning_rate.to_string()),
            ("ensemble.booster_max_depth", e.booster_max_depth.to_string()),
            ("analysis.max_lag", self.max_lag.to_string()),
            ("analysis.hist_width", self.bins.width.to_string()),
            ("analysis.hist_bins", self.bins.count.to_string()),
            ("sim.sample_rate", s.sample_rate.to_string()),
            ("sim.fundamental", s.fundamental_freq.to_string()),
            ("sim.cycles", s.cycles.to_string()),
            ("sim.settle_cycles", s.settle_cycles.to_string()),
            ("sim.band_fraction", self.band_fraction.to_string()),
            ("sim.band_amps", show_auto(&self.band_amps)),
            ("sim.slew", show_auto(&s.slew)),
            (
                "sim.phases",
                match s.phases {
                    PhaseMode::Aligned => "aligned".into(),
                    PhaseMode::Random { .. } => "random".into(),
                },
            ),
            ("sim.max_plots", s.max_plots.to_string()),
            ("sim.line", self.sim_line.map_or("all".into(), |l| l.number().to_string())),
        ]
    }

    pub fn dump(&self) -> String {
        let mut out = String::from("# effective configuration\n");
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str, source: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key = value", source.display(), i + 1))
            })?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("{}:{}: {}", source.display(), i + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(strip(e));
        self.split.validate().map_err(cfg)?;
        self.sim.validate()?;
        self.adam_check()?;
        let checks = [
            (self.days == 0, "data.days must be >= 1"),
            (self.window == 0, "data.window must be >= 1"),
            (self.stride == 0, "data.stride must be >= 1"),
            (self.epochs == 0, "train.epochs must be >= 1"),
            (self.batch_size == 0, "train.batch_size must be >= 1"),
            (self.max_lag == 0, "analysis.max_lag must be >= 1"),
            (
                !(self.bins.width > 0.0) || self.bins.count == 0,
                "analysis.hist_width and analysis.hist_bins must be positive",
            ),
            (
                self.ensemble.forest_estimators.contains(&0) || self.ensemble.booster_estimators == 0,
                "ensemble estimator counts must be >= 1",
            ),
            (
                !(self.ensemble.booster_learning_rate > 0.0 && self.ensemble.booster_learning_rate <= 1.0),
                "ensemble.booster_learning_rate must be in (0, 1]",
            ),
            (self.ensemble.forest_min_samples_leaf == 0, "ensemble.forest_min_samples_leaf must be >= 1"),
            (self.ensemble.forest_max_features == Some(0), "ensemble.forest_max_features must be >= 1"),
        ];
        match checks.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::Config(msg.to_string())),
            None => Ok(()),
        }
    }

    fn adam_check(&self) -> Result<()> {
        let a = &self.adam;
        let ok = a.learning_rate.is_finite()
            && a.learning_rate >= 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {a:?}")))
        }
    }
}

/// The message of a config error without its "config error:" prefix.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
