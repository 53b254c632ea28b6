//! Ensemble artifact: one or more per-order tree models for one line, stored
//! together with the scalers and data settings they were fitted with.
//!
//! ```text
//! harmonic-ensemble-bundle 1
//! model random-forest
//! line 1
//! window 100
//! split 0.7 0.15 0.15
//! member 3
//! input_scaler 5 <shift…> <scale…>
//! target_scaler 1 <shift> <scale>
//! harmonic-ensemble 1
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{HarmonicOrder, Line, Scaler, SplitFractions};
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::train::checkpoint::{parse_scaler, scaler_line};

use super::ModelChoice;

pub const BUNDLE_MAGIC: &str = "harmonic-ensemble-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BundleMember {
    pub order: HarmonicOrder,
    pub input_scaler: Scaler,
    pub target_scaler: Scaler,
    pub model: EnsembleModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBundle {
    pub model: ModelChoice,
    pub line: Line,
    pub window: usize,
    pub split: SplitFractions,
    pub members: Vec<BundleMember>,
}

impl EnsembleBundle {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{BUNDLE_MAGIC} {BUNDLE_VERSION}");
        let _ = writeln!(s, "model {}", self.model);
        let _ = writeln!(s, "line {}", self.line.number());
        let _ = writeln!(s, "window {}", self.window);
        let _ = writeln!(s, "split {} {} {}", self.split.train, self.split.val, self.split.test);
        for m in &self.members {
            let _ = writeln!(s, "member {}", m.order.order());
            let _ = writeln!(s, "input_scaler {}", scaler_line(&Some(m.input_scaler.clone())));
            let _ = writeln!(s, "target_scaler {}", scaler_line(&Some(m.target_scaler.clone())));
            s.push_str(&m.model.to_text());
            if !s.ends_with('\n') {
                s.push('\n');
            }
            s.push_str("end\n");
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<EnsembleBundle> {
        let bad = |msg: String| Error::corrupt(path, msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let version = header
            .strip_prefix(BUNDLE_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(format!("not an ensemble bundle: {header:?}")))?;
        if version != BUNDLE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: BUNDLE_VERSION,
            });
        }
        let mut field = |name: &str| -> Result<String> {
            let l = lines.next().ok_or_else(|| bad(format!("missing {name}")))?;
            l.strip_prefix(name)
                .and_then(|v| v.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected {name}, got {l:?}")))
        };
        let model: ModelChoice = field("model")?.parse().map_err(|_| bad("unknown model".into()))?;
        let line = field("line")?
            .parse()
            .ok()
            .and_then(|n| Line::from_number(n).ok())
            .ok_or_else(|| bad("bad line".into()))?;
        let window = field("window")?.parse().map_err(|_| bad("bad window".into()))?;
        let split: Vec<f64> = field("split")?
            .split(' ')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad split".into()))?;
        let [train, val, test] = split[..] else {
            return Err(bad("split needs three fractions".into()));
        };
        let mut members = Vec::new();
        while let Some(l) = lines.next() {
            let order = l
                .strip_prefix("member ")
                .and_then(|v| v.parse().ok())
                .and_then(|n| HarmonicOrder::from_order(n).ok())
                .ok_or_else(|| bad(format!("expected member, got {l:?}")))?;
            let mut scaler = |name: &str| -> Result<Scaler> {
                let l = lines.next().ok_or_else(|| bad(format!("missing {name}")))?;
                l.strip_prefix(name)
                    .and_then(|v| v.strip_prefix(' '))
                    .and_then(parse_scaler)
                    .flatten()
                    .ok_or_else(|| bad(format!("bad {name}")))
            };
            let input_scaler = scaler("input_scaler")?;
            let target_scaler = scaler("target_scaler")?;
            let mut body = String::new();
            loop {
                match lines.next() {
                    Some("end") => break,
                    Some(l) => {
                        body.push_str(l);
                        body.push('\n');
                    }
                    None => return Err(bad("member without end".into())),
                }
            }
            let model = EnsembleModel::from_text(&body).map_err(|e| match e {
                Error::Version { .. } => e,
                other => bad(other.to_string()),
            })?;
            members.push(BundleMember {
                order,
                input_scaler,
                target_scaler,
                model,
            });
        }
        if members.is_empty() {
            return Err(bad("bundle holds no models".into()));
        }
        Ok(EnsembleBundle {
            model,
            line,
            window,
            split: SplitFractions { train, val, test },
            members,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<EnsembleBundle> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{fit_random_forest, ForestConfig};
    use ndarray::array;

    fn bundle() -> EnsembleBundle {
        let x = array![[0.0, 1.0], [1.0, 0.5], [2.0, 0.25], [3.0, 0.125]];
        let y = [0.1, 0.7, 1.0 / 3.0, 2.5];
        let forest = fit_random_forest(x.view(), &y, &ForestConfig::with_estimators(3, 9)).unwrap();
        EnsembleBundle {
            model: ModelChoice::RandomForest,
            line: Line::L2,
            window: 100,
            split: SplitFractions::default(),
            members: vec![BundleMember {
                order: HarmonicOrder::Fifth,
                input_scaler: Scaler {
                    shift: vec![0.1, 0.2],
                    scale: vec![3.0, 1.0 / 7.0],
                },
                target_scaler: Scaler::identity(1),
                model: EnsembleModel::Forest(forest),
            }],
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let b = bundle();
        let text = b.to_text();
        let back = EnsembleBundle::from_text(&text, Path::new("b")).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn damaged_bundles() {
        let text = bundle().to_text();
        let p = Path::new("b");
        assert!(matches!(EnsembleBundle::from_text("", p), Err(Error::Corrupt { .. })));
        let cut = &text[..text.len() - 4];
        assert!(matches!(EnsembleBundle::from_text(cut, p), Err(Error::Corrupt { .. })));
        let v2 = text.replacen("bundle 1", "bundle 2", 1);
        assert!(matches!(EnsembleBundle::from_text(&v2, p), Err(Error::Version { found: 2, .. })));
    }
}
