//! Line-oriented text format. Trees are dumped in pre-order, one node per
//! line (`S <feature> <threshold>` or `L <value>`); floats use Rust's shortest
//! round-trip formatting, so a dump reloads bit for bit.
//!
//! ```text
//! harmonic-ensemble 1
//! kind forest
//! features 5
//! trees 2
//! S 2 0.5
//! L 1
//! L 3
//! L 2
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use super::booster::BoosterModel;
use super::forest::ForestModel;
use super::tree::TreeNode;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "harmonic-ensemble";

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleModel {
    Forest(ForestModel),
    Booster(BoosterModel),
}

impl EnsembleModel {
    pub fn n_features(&self) -> usize {
        match self {
            EnsembleModel::Forest(m) => m.n_features,
            EnsembleModel::Booster(m) => m.n_features,
        }
    }

    pub fn predict(&self, x: ndarray::ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            EnsembleModel::Forest(m) => m.predict(x),
            EnsembleModel::Booster(m) => m.predict(x),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EnsembleModel::Forest(_) => "forest",
            EnsembleModel::Booster(_) => "booster",
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {FORMAT_VERSION}\nkind {}\nfeatures {}\n", self.kind_name(), self.n_features());
        let trees = match self {
            EnsembleModel::Forest(m) => &m.trees,
            EnsembleModel::Booster(m) => {
                let _ = writeln!(out, "init {}\nlearning_rate {}", m.init, m.learning_rate);
                &m.stages
            }
        };
        let _ = writeln!(out, "trees {}", trees.len());
        for t in trees {
            dump(t, &mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<EnsembleModel> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
        };
        let (line, head) = lines.next_line()?;
        let version = head
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| parse_err(line, "missing ensemble header"))?;
        let version: u32 = parse_num(line, version)?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let kind = lines.field("kind")?;
        let n_features: usize = lines.number("features")?;
        let model = match kind.as_str() {
            "forest" => {
                let trees = read_trees(&mut lines, n_features)?;
                if trees.is_empty() {
                    return Err(parse_err(0, "a forest needs at least one tree"));
                }
                EnsembleModel::Forest(ForestModel { trees, n_features })
            }
            "booster" => {
                let init = lines.number("init")?;
                let learning_rate = lines.number("learning_rate")?;
                let stages = read_trees(&mut lines, n_features)?;
                EnsembleModel::Booster(BoosterModel {
                    init,
                    learning_rate,
                    stages,
                    n_features,
                })
            }
            other => return Err(parse_err(2, format!("unknown ensemble kind '{other}'"))),
        };
        if let Some((line, extra)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
            return Err(parse_err(line + 1, format!("trailing content '{extra}'")));
        }
        Ok(model)
    }
}

fn dump(t: &TreeNode, out: &mut String) {
    match t {
        TreeNode::Leaf { value } => {
            let _ = writeln!(out, "L {value}");
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "S {feature} {threshold}");
            dump(left, out);
            dump(right, out);
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: msg.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{}'", s.trim())))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl Lines<'_> {
    fn next_line(&mut self) -> Result<(usize, String)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or_else(|| parse_err(0, "unexpected end of input"))
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let (line, text) = self.next_line()?;
        match text.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(parse_err(line, format!("expected '{key} <value>'"))),
        }
    }

    fn number<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        parse_num(0, &v)
    }
}

fn read_trees(lines: &mut Lines, n_features: usize) -> Result<Vec<TreeNode>> {
    let count: usize = lines.number("trees")?;
    (0..count).map(|_| read_node(lines, n_features)).collect()
}

fn read_node(lines: &mut Lines, n_features: usize) -> Result<TreeNode> {
    let (line, text) = lines.next_line()?;
    let parts: Vec<&str> = text.split_whitespace().collect();
    match parts.as_slice() {
        ["L", v] => {
            let value: f64 = parse_num(line, v)?;
            if !value.is_finite() {
                return Err(parse_err(line, "non-finite leaf"));
            }
            Ok(TreeNode::Leaf { value })
        }
        ["S", f, t] => {
            let feature: usize = parse_num(line, f)?;
            if feature >= n_features {
                return Err(parse_err(line, format!("feature {feature} out of range")));
            }
            let threshold: f64 = parse_num(line, t)?;
            let left = Box::new(read_node(lines, n_features)?);
            let right = Box::new(read_node(lines, n_features)?);
            Ok(TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            })
        }
        _ => Err(parse_err(line, format!("bad tree node '{text}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{fit_gradient_booster, fit_random_forest, BoosterConfig, ForestConfig};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data() -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((60, 4), |_| rng.gen_range(-1.0..1.0) / 3.0);
        let y = x.rows().into_iter().map(|r| f64::exp(r.sum()) * 0.1).collect();
        (x, y)
    }

    #[test]
    fn forest_round_trip_is_exact() {
        let (x, y) = data();
        let m = EnsembleModel::Forest(fit_random_forest(x.view(), &y, &ForestConfig::with_estimators(4, 1)).unwrap());
        let text = m.to_text();
        let back = EnsembleModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn booster_round_trip_is_exact() {
        let (x, y) = data();
        let cfg = BoosterConfig {
            n_estimators: 7,
            ..BoosterConfig::default()
        };
        let m = EnsembleModel::Booster(fit_gradient_booster(x.view(), &y, &cfg).unwrap().model);
        let back = EnsembleModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let p1 = m.predict(x.view()).unwrap();
        let p2 = back.predict(x.view()).unwrap();
        assert!(p1.iter().zip(&p2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_and_bad_input() {
        let (x, y) = data();
        let text = EnsembleModel::Forest(fit_random_forest(x.view(), &y, &ForestConfig::with_estimators(2, 1)).unwrap())
            .to_text();
        let cut = &text[..text.len() / 2];
        assert!(EnsembleModel::from_text(cut).is_err());
        assert!(EnsembleModel::from_text("").is_err());
        assert!(matches!(
            EnsembleModel::from_text(&text.replacen("ensemble 1", "ensemble 9", 1)),
            Err(Error::Version { found: 9, .. })
        ));
        assert!(EnsembleModel::from_text(&format!("{text}L 1\n")).is_err());
        assert!(EnsembleModel::from_text(&text.replacen("kind forest", "kind bush", 1)).is_err());
    }

    #[test]
    fn hand_written_example_parses() {
        let text = "harmonic-ensemble 1\nkind forest\nfeatures 5\ntrees 2\nS 2 0.5\nL 1\nL 3\nL 2\n";
        let m = EnsembleModel::from_text(text).unwrap();
        assert_eq!(m.predict(Array2::from_elem((1, 5), 0.0).view()).unwrap(), vec![1.5]);
        assert_eq!(m.to_text(), text);
    }
}
