//! Checkpoint files: a text manifest describing the architecture, scalers and
//! tags, followed by the parameters as little-endian `f64`.
//!
//! ```text
//! harmonic-checkpoint 1
//! kind LstmOnly
//! input seq 100 1
//! layer lstm 352 1 0 0
//! ...
//! epoch 2
//! monitor 3e-1
//! input_scaler 1 <shift…> <scale…>
//! target_scaler 1 <shift…> <scale…>
//! tag line 1
//! tensor 353 1408
//! ...
//! payload <bytes> <fnv1a-64 hex>
//! <payload bytes>
//! ```
//!
//! The checksum covers the manifest text before the `payload` line and the
//! payload itself.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::neural::{Activation, LayerSpec, Model, ModelKind, ModelSpec, Shape};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "harmonic-checkpoint";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointMeta {
    pub input_scaler: Option<Scaler>,
    pub target_scaler: Option<Scaler>,
    /// Free-form `key value` pairs (line, order, window, …).
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: Vec<Array2<f64>>,
    /// 1-based epoch the parameters come from.
    pub epoch: usize,
    /// Validation loss at that epoch.
    pub monitor: f64,
    pub meta: CheckpointMeta,
}

pub(crate) fn fnv1a64(chunks: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for chunk in chunks {
        for &b in *chunk {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn layer_line(l: &LayerSpec) -> String {
    let b = |v: bool| v as u8;
    match l {
        LayerSpec::Dense { units, activation, l2 } => format!("dense {units} {activation} {l2:e}"),
        LayerSpec::Lstm {
            units,
            return_sequences,
            return_state,
            initial_state,
        } => format!(
            "lstm {units} {} {} {}",
            b(*return_sequences),
            b(*return_state),
            b(*initial_state)
        ),
        LayerSpec::Gru { units, return_sequences } => format!("gru {units} {}", b(*return_sequences)),
        LayerSpec::Dropout { rate } => format!("dropout {rate:e}"),
        LayerSpec::Flatten => "flatten".to_string(),
        LayerSpec::RepeatVector { n } => format!("repeat {n}"),
        LayerSpec::TimeDistributedDense { units, activation } => format!("timedist {units} {activation}"),
    }
}

pub(crate) fn scaler_line(s: &Option<Scaler>) -> String {
    match s {
        None => "none".to_string(),
        Some(s) => {
            let mut out = s.features().to_string();
            for v in s.shift.iter().chain(&s.scale) {
                let _ = write!(out, " {v:e}");
            }
            out
        }
    }
}

impl Checkpoint {
    pub fn from_model(model: &Model, epoch: usize, monitor: f64, meta: CheckpointMeta) -> Checkpoint {
        Checkpoint {
            spec: model.spec.clone(),
            params: model.params.clone(),
            epoch,
            monitor,
            meta,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.spec.clone(), self.params.clone())
    }

    pub fn tag(&self, key: &str) -> Option<&str> {
        self.meta.tags.get(key).map(String::as_str)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut m = format!("{MAGIC} {CHECKPOINT_VERSION}\nkind {}\n", self.spec.kind.name());
        let _ = match self.spec.input {
            Shape::Flat(n) => writeln!(m, "input flat {n}"),
            Shape::Seq(t, f) => writeln!(m, "input seq {t} {f}"),
        };
        for l in &self.spec.layers {
            let _ = writeln!(m, "layer {}", layer_line(l));
        }
        let _ = writeln!(m, "epoch {}\nmonitor {:e}", self.epoch, self.monitor);
        let _ = writeln!(m, "input_scaler {}", scaler_line(&self.meta.input_scaler));
        let _ = writeln!(m, "target_scaler {}", scaler_line(&self.meta.target_scaler));
        for (k, v) in &self.meta.tags {
            let _ = writeln!(m, "tag {k} {v}");
        }
        let mut payload = Vec::new();
        for p in &self.params {
            let _ = writeln!(m, "tensor {} {}", p.nrows(), p.ncols());
            for v in p.iter() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a64(&[m.as_bytes(), &payload]);
        let mut out = m.into_bytes();
        out.extend_from_slice(format!("payload {} {sum:016x}\n", payload.len()).as_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
        let corrupt = |msg: String| Error::corrupt(path, msg);
        let marker = b"\npayload ";
        let cut = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or_else(|| corrupt("no payload section (truncated?)".into()))?;
        let manifest = std::str::from_utf8(&bytes[..cut + 1]).map_err(|_| corrupt("manifest is not UTF-8".into()))?;
        let rest = &bytes[cut + 1..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| corrupt("unterminated payload line".into()))?;
        let payload_line = std::str::from_utf8(&rest[..nl]).map_err(|_| corrupt("bad payload line".into()))?;
        let payload = &rest[nl + 1..];
        let fields: Vec<&str> = payload_line.split_whitespace().collect();
        let (len, sum) = match fields.as_slice() {
            ["payload", len, sum] => (
                len.parse::<usize>().map_err(|_| corrupt("bad payload length".into()))?,
                u64::from_str_radix(sum, 16).map_err(|_| corrupt("bad checksum".into()))?,
            ),
            _ => return Err(corrupt("bad payload line".into())),
        };

        let mut lines = manifest.lines();
        let head = lines.next().unwrap_or_default();
        let version = head
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| corrupt("not a checkpoint file".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if payload.len() != len {
            return Err(corrupt(format!("payload has {} bytes, manifest says {len}", payload.len())));
        }
        if fnv1a64(&[manifest.as_bytes(), payload]) != sum {
            return Err(corrupt("checksum mismatch".into()));
        }

        let mut kind = None;
        let mut input = None;
        let mut layers = Vec::new();
        let mut epoch = None;
        let mut monitor = None;
        let mut meta = CheckpointMeta::default();
        let mut shapes = Vec::new();
        for line in lines {
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            let bad = || corrupt(format!("bad manifest line '{line}'"));
            match key {
                "kind" => kind = Some(ModelKind::from_str(value).map_err(|_| bad())?),
                "input" => input = Some(parse_shape(value).ok_or_else(bad)?),
                "layer" => layers.push(parse_layer(value).ok_or_else(bad)?),
                "epoch" => epoch = Some(value.parse().map_err(|_| bad())?),
                "monitor" => monitor = Some(value.parse().map_err(|_| bad())?),
                "input_scaler" => meta.input_scaler = parse_scaler(value).ok_or_else(bad)?,
                "target_scaler" => meta.target_scaler = parse_scaler(value).ok_or_else(bad)?,
                "tag" => {
                    let (k, v) = value.split_once(' ').ok_or_else(bad)?;
                    meta.tags.insert(k.to_string(), v.to_string());
                }
                "tensor" => {
                    let dims: Vec<usize> = value.split(' ').map(str::parse).collect::<Result<_, _>>().map_err(|_| bad())?;
                    match dims.as_slice() {
                        [r, c] => shapes.push((*r, *c)),
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(bad()),
            }
        }
        let missing = |what: &str| corrupt(format!("manifest lacks '{what}'"));
        let spec = ModelSpec {
            kind: kind.ok_or_else(|| missing("kind"))?,
            input: input.ok_or_else(|| missing("input"))?,
            layers,
        };
        let expected = spec.param_shapes().map_err(|e| corrupt(e.to_string()))?;
        if expected != shapes {
            return Err(corrupt("tensor shapes do not match the architecture".into()));
        }
        let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
        if total * 8 != payload.len() {
            return Err(corrupt("payload size does not match tensor shapes".into()));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let params = shapes
            .iter()
            .map(|&(r, c)| Array2::from_shape_fn((r, c), |_| values.next().expect("sized above")))
            .collect();
        Ok(Checkpoint {
            spec,
            params,
            epoch: epoch.ok_or_else(|| missing("epoch"))?,
            monitor: monitor.ok_or_else(|| missing("monitor"))?,
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes, path)
    }
}

fn parse_shape(s: &str) -> Option<Shape> {
    let parts: Vec<&str> = s.split(' ').collect();
    match parts.as_slice() {
        ["flat", n] => Some(Shape::Flat(n.parse().ok()?)),
        ["seq", t, f] => Some(Shape::Seq(t.parse().ok()?, f.parse().ok()?)),
        _ => None,
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn parse_layer(s: &str) -> Option<LayerSpec> {
    let parts: Vec<&str> = s.split(' ').collect();
    Some(match parts.as_slice() {
        ["dense", u, a, l2] => LayerSpec::Dense {
            units: u.parse().ok()?,
            activation: Activation::from_str(a).ok()?,
            l2: l2.parse().ok()?,
        },
        ["lstm", u, rs, st, init] => LayerSpec::Lstm {
            units: u.parse().ok()?,
            return_sequences: parse_flag(rs)?,
            return_state: parse_flag(st)?,
            initial_state: parse_flag(init)?,
        },
        ["gru", u, rs] => LayerSpec::Gru {
            units: u.parse().ok()?,
            return_sequences: parse_flag(rs)?,
        },
        ["dropout", r] => LayerSpec::Dropout { rate: r.parse().ok()? },
        ["flatten"] => LayerSpec::Flatten,
        ["repeat", n] => LayerSpec::RepeatVector { n: n.parse().ok()? },
        ["timedist", u, a] => LayerSpec::TimeDistributedDense {
            units: u.parse().ok()?,
            activation: Activation::from_str(a).ok()?,
        },
        _ => return None,
    })
}

pub(crate) fn parse_scaler(s: &str) -> Option<Option<Scaler>> {
    if s == "none" {
        return Some(None);
    }
    let mut it = s.split(' ');
    let n: usize = it.next()?.parse().ok()?;
    let vals: Vec<f64> = it.map(str::parse).collect::<Result<_, _>>().ok()?;
    if vals.len() != 2 * n {
        return None;
    }
    Some(Some(Scaler {
        shift: vals[..n].to_vec(),
        scale: vals[n..].to_vec(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{miniature, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::PathBuf;

    fn sample(kind: ModelKind) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(kind as u64);
        let model = Model::init(miniature(kind, 3, 4), &mut rng).unwrap();
        let mut meta = CheckpointMeta {
            input_scaler: Some(Scaler {
                shift: vec![0.1, -2.5],
                scale: vec![3.0, 1.0 / 3.0],
            }),
            target_scaler: None,
            tags: BTreeMap::new(),
        };
        meta.tags.insert("line".into(), "2".into());
        meta.tags.insert("order".into(), "5".into());
        Checkpoint::from_model(&model, 7, 0.1 + 0.2, meta)
    }

    fn mem() -> PathBuf {
        PathBuf::from("memory")
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        for kind in ModelKind::ALL {
            let ck = sample(kind);
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes, &mem()).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes(), bytes);
            for (a, b) in back.params.iter().zip(&ck.params) {
                assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn loaded_model_predicts_bitwise_equal() {
        let ck = sample(ModelKind::Seq2Seq);
        let back = Checkpoint::from_bytes(&ck.to_bytes(), &mem()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::Seq(ndarray::Array3::from_shape_fn((4, 5, 1), |_| rng.gen_range(-1.0..1.0)));
        let a = ck.model().unwrap().predict(&x).unwrap();
        let b = back.model().unwrap().predict(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = sample(ModelKind::GruDense).to_bytes();
        for cut in [bytes.len() - 1, bytes.len() - 8, bytes.len() / 2, 10] {
            let err = Checkpoint::from_bytes(&bytes[..cut], &mem()).unwrap_err();
            assert!(matches!(err, Error::Corrupt { .. }), "cut {cut}: {err}");
        }
    }

    #[test]
    fn flipped_payload_byte_is_corrupt() {
        let mut bytes = sample(ModelKind::DenseMlp).to_bytes();
        let n = bytes.len();
        bytes[n - 3] ^= 0x10;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes, &mem()),
            Err(Error::Corrupt { message, .. }) if message.contains("checksum")
        ));
    }

    #[test]
    fn version_mismatch() {
        let bytes = sample(ModelKind::LstmOnly).to_bytes();
        let mut edited = b"harmonic-checkpoint 2".to_vec();
        edited.extend_from_slice(&bytes["harmonic-checkpoint 1".len()..]);
        assert!(matches!(
            Checkpoint::from_bytes(&edited, &mem()),
            Err(Error::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn file_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample(ModelKind::LstmDense);
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        assert!(matches!(Checkpoint::load(dir.path().join("nope")), Err(Error::Io { .. })));
    }
}
