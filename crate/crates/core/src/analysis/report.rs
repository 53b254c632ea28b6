//! Report bundle writer.
//!
//! File names inside `out_dir`:
//!
//! | file | contents |
//! |---|---|
//! | `index.csv` | every file written, with its kind |
//! | `errors_<name>.csv` / `errors_<name>_hist.svg` | one per error summary |
//! | `acf.csv` / `acf.svg` | autocorrelation coefficients |
//! | `profile_<metric>.csv` / `profile_<metric>.svg` | time-of-day band means |
//! | `scatter_<name>.svg` | one per scatter pair |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::errors::ErrorSummary;
use super::profile::DailyProfile;
use super::stats::AcfResult;
use crate::error::{Error, Result};
use crate::svg::{extent, Plot};

const MAX_SCATTER_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportBundle<'a> {
    pub summaries: &'a [ErrorSummary],
    pub acf: Option<&'a AcfResult>,
    pub profiles: &'a [DailyProfile],
    pub scatters: &'a [Scatter],
}

pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

struct Writer<'p> {
    dir: &'p Path,
    index: Vec<(String, &'static str)>,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: String, kind: &'static str, body: &str) -> Result<()> {
        let path = self.dir.join(&name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.index.push((name, kind));
        self.written.push(path);
        Ok(())
    }
}

fn summary_csv(s: &ErrorSummary) -> String {
    let mut out = String::from("name,count,excluded,mean_pct,p95_pct,bin_lo_pct,bin_hi_pct,bin_count\n");
    for (i, c) in s.histogram.counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            s.name,
            s.count(),
            s.excluded,
            s.mean,
            s.p95,
            s.histogram.edges[i],
            s.histogram.edges[i + 1],
            c
        );
    }
    out
}

fn summary_svg(s: &ErrorSummary) -> String {
    let h = &s.histogram;
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let x_hi = *h.edges.last().unwrap_or(&1.0);
    let mut plot = Plot::new(
        &format!("{}: mean {:.2}%, p95 {:.2}%", s.name, s.mean, s.p95),
        "relative error (%)",
        "count",
        (0.0, x_hi),
        (0.0, top * 1.05),
    );
    let bars: Vec<_> = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (h.edges[i], h.edges[i + 1], c as f64))
        .collect();
    plot.bars(&bars, "#4477aa");
    plot
        .finish()
}

fn acf_csv(acf: &AcfResult) -> String {
    let mut out = String::from("lag,coefficient\n");
    for (k, r) in acf.coefficients.iter().enumerate() {
        let _ = writeln!(out, "{k},{r:.6}");
    }
    out
}

fn acf_svg(acf: &AcfResult) -> String {
    let (lo, _) = extent(acf.coefficients.iter().copied());
    let mut plot = Plot::new(
        "autocorrelation",
        "lag",
        "r",
        (0.0, acf.max_lag().max(1) as f64),
        (lo.min(0.0), 1.0),
    );
    let pts: Vec<_> = acf
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, &r)| (k as f64, r))
        .collect();
    plot.hline(0.0, "#999999");
    plot.polyline(&pts, "#cc3311");
    plot.finish()
}

fn profile_csv(p: &DailyProfile) -> String {
    let mut out = String::from("band,start_hour,end_hour,count,mean\n");
    for b in &p.bands {
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{},{:.6}",
            b.band.name, b.band.start_hour, b.band.end_hour, b.count, b.mean
        );
    }
    let _ = writeln!(out, "overall,0.000,24.000,,{:.6}", p.overall_mean);
    out
}

fn profile_svg(p: &DailyProfile) -> String {
    let (_, hi) = extent(p.bands.iter().map(|b| b.mean).chain([p.overall_mean]));
    let mut plot = Plot::new(
        &format!("{} by time of day", p.metric),
        "hour of day",
        &p.metric.to_string(),
        (0.0, 24.0),
        (0.0, hi.max(1e-12) * 1.1),
    );
    let bars: Vec<_> = p
        .bands
        .iter()
        .map(|b| (b.band.start_hour, b.band.end_hour, b.mean))
        .collect();
    plot.bars(&bars, "#66ccee");
    for b in &p.bands {
        plot.label((b.band.start_hour + b.band.end_hour) / 2.0, b.mean, &b.band.name);
    }
    plot.hline(p.overall_mean, "#333333");
    plot.finish()
}

fn scatter_svg(s: &Scatter) -> String {
    let step = s.points.len().div_ceil(MAX_SCATTER_POINTS).max(1);
    let pts: Vec<_> = s.points.iter().step_by(step).copied().collect();
    let title = match s.pearson {
        Some(r) => format!("{} (r = {r:.3})", s.name),
        None => s.name.clone(),
    };
    let mut plot = Plot::new(
        &title,
        &s.x_label,
        &s.y_label,
        extent(pts.iter().map(|p| p.0)),
        extent(pts.iter().map(|p| p.1)),
    );
    plot.points(&pts, "#228833");
    plot.finish()
}

/// Writes the bundle into `out_dir` (created if missing) and returns the paths written.
pub fn emit_report(bundle: &ReportBundle<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut w = Writer {
        dir: out_dir,
        index: Vec::new(),
        written: Vec::new(),
    };
    for s in bundle.summaries {
        let stem = file_stem(&s.name);
        w.put(format!("errors_{stem}.csv"), "error-summary", &summary_csv(s))?;
        w.put(format!("errors_{stem}_hist.svg"), "histogram", &summary_svg(s))?;
    }
    if let Some(acf) = bundle.acf {
        w.put("acf.csv".into(), "acf", &acf_csv(acf))?;
        w.put("acf.svg".into(), "acf-plot", &acf_svg(acf))?;
    }
    for p in bundle.profiles {
        let stem = file_stem(&p.metric.to_string());
        w.put(format!("profile_{stem}.csv"), "profile", &profile_csv(p))?;
        w.put(format!("profile_{stem}.svg"), "profile-plot", &profile_svg(p))?;
    }
    for s in bundle.scatters {
        w.put(format!("scatter_{}.svg", file_stem(&s.name)), "scatter", &scatter_svg(s))?;
    }
    let mut index = String::from("file,kind\n");
    for (name, kind) in &w.index {
        let _ = writeln!(index, "{name},{kind}");
    }
    let path = out_dir.join("index.csv");
    fs::write(&path, index).map_err(|e| Error::io(&path, e))?;
    w.written.push(path);
    Ok(w.written)
}
