use std::fmt;
use std::str::FromStr;

use super::activation::Activation;
use crate::error::{Error, Result};

pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const DEFAULT_L2: f64 = 0.01;
pub const DEFAULT_WINDOW: usize = 100;
pub const MLP_INPUT_WIDTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    DenseMlp,
    LstmOnly,
    LstmDense,
    GruDense,
    Seq2Seq,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::DenseMlp,
        ModelKind::LstmOnly,
        ModelKind::LstmDense,
        ModelKind::GruDense,
        ModelKind::Seq2Seq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DenseMlp => "DenseMLP",
            ModelKind::LstmOnly => "LstmOnly",
            ModelKind::LstmDense => "LstmDense",
            ModelKind::GruDense => "GruDense",
            ModelKind::Seq2Seq => "Seq2Seq",
        }
    }

    pub fn is_sequence(self) -> bool {
        self != ModelKind::DenseMlp
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "densemlp" | "mlp" | "dense" => Ok(ModelKind::DenseMlp),
            "lstmonly" | "lstm" => Ok(ModelKind::LstmOnly),
            "lstmdense" => Ok(ModelKind::LstmDense),
            "grudense" | "gru" => Ok(ModelKind::GruDense),
            "seq2seq" => Ok(ModelKind::Seq2Seq),
            _ => Err(Error::invalid(format!("unknown model '{s}'"))),
        }
    }
}

/// Activation shape for one sample: a feature vector or a `(steps, features)` sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Flat(usize),
    Seq(usize, usize),
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Flat(n) => write!(f, "({n})"),
            Shape::Seq(t, n) => write!(f, "({t}, {n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        units: usize,
        activation: Activation,
        l2: f64,
    },
    Lstm {
        units: usize,
        return_sequences: bool,
        /// Also hand `(h_T, C_T)` to the next layer that takes an initial state.
        return_state: bool,
        /// Start from the state handed over by an earlier `return_state` layer.
        initial_state: bool,
    },
    Gru {
        units: usize,
        return_sequences: bool,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    RepeatVector {
        n: usize,
    },
    TimeDistributedDense {
        units: usize,
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> LayerSpec {
        LayerSpec::Dense {
            units,
            activation,
            l2: 0.0,
        }
    }

    pub fn lstm(units: usize, return_sequences: bool) -> LayerSpec {
        LayerSpec::Lstm {
            units,
            return_sequences,
            return_state: false,
            initial_state: false,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Lstm { .. } => "LSTM",
            LayerSpec::Gru { .. } => "GRU",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::RepeatVector { .. } => "RepeatVector",
            LayerSpec::TimeDistributedDense { .. } => "TimeDistributed",
        }
    }

    pub fn is_parameterized(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { .. } | LayerSpec::Lstm { .. } | LayerSpec::Gru { .. } | LayerSpec::TimeDistributedDense { .. }
        )
    }

    /// Output shape and parameter tensor shapes for a given input shape.
    pub fn resolve(&self, input: Shape) -> Result<(Shape, Vec<(usize, usize)>)> {
        let bad = |what: &str| {
            Err(Error::shape(
                format!("{what} input for {}", self.kind_name()),
                input.to_string(),
            ))
        };
        match *self {
            LayerSpec::Dense { units, l2, .. } => {
                if units == 0 || !(l2 >= 0.0) {
                    return Err(Error::invalid("dense layer needs units > 0 and l2 >= 0"));
                }
                match input {
                    Shape::Flat(n) => Ok((Shape::Flat(units), vec![(n, units), (1, units)])),
                    Shape::Seq(..) => bad("flat"),
                }
            }
            LayerSpec::Lstm {
                units,
                return_sequences,
                ..
            } => {
                if units == 0 {
                    return Err(Error::invalid("lstm layer needs units > 0"));
                }
                match input {
                    Shape::Seq(t, n) => {
                        let out = if return_sequences { Shape::Seq(t, units) } else { Shape::Flat(units) };
                        Ok((out, vec![(units + n, 4 * units), (1, 4 * units)]))
                    }
                    Shape::Flat(_) => bad("sequence"),
                }
            }
            LayerSpec::Gru {
                units,
                return_sequences,
            } => {
                if units == 0 {
                    return Err(Error::invalid("gru layer needs units > 0"));
                }
                match input {
                    Shape::Seq(t, n) => {
                        let out = if return_sequences { Shape::Seq(t, units) } else { Shape::Flat(units) };
                        Ok((out, vec![(units + n, 3 * units), (1, 3 * units), (1, 3 * units)]))
                    }
                    Shape::Flat(_) => bad("sequence"),
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok((input, vec![]))
            }
            LayerSpec::Flatten => match input {
                Shape::Flat(n) => Ok((Shape::Flat(n), vec![])),
                Shape::Seq(t, n) => Ok((Shape::Flat(t * n), vec![])),
            },
            LayerSpec::RepeatVector { n } => match input {
                Shape::Flat(f) if n > 0 => Ok((Shape::Seq(n, f), vec![])),
                _ => bad("flat"),
            },
            LayerSpec::TimeDistributedDense { units, .. } => match input {
                Shape::Seq(t, n) if units > 0 => Ok((Shape::Seq(t, units), vec![(n, units), (1, units)])),
                _ => bad("sequence"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

/// Resolved per-layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub input: Shape,
    pub output: Shape,
    pub params: Vec<(usize, usize)>,
}

impl ModelSpec {
    pub fn plan(&self) -> Result<Vec<LayerPlan>> {
        let mut shape = self.input;
        let mut pending_state: Option<usize> = None;
        let mut plans = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, params) = layer.resolve(shape)?;
            if let LayerSpec::Lstm {
                units,
                return_state,
                initial_state,
                ..
            } = *layer
            {
                if initial_state {
                    match pending_state.take() {
                        Some(u) if u == units => {}
                        _ => {
                            return Err(Error::invalid(
                                "initial_state layer needs an earlier return_state LSTM of equal width",
                            ))
                        }
                    }
                }
                if return_state {
                    pending_state = Some(units);
                }
            }
            plans.push(LayerPlan {
                input: shape,
                output: out,
                params,
            });
            shape = out;
        }
        if pending_state.is_some() {
            return Err(Error::invalid("returned state is never consumed"));
        }
        Ok(plans)
    }

    pub fn output(&self) -> Result<Shape> {
        Ok(self.plan()?.last().map(|p| p.output).unwrap_or(self.input))
    }

    /// Number of output values per sample.
    pub fn output_width(&self) -> Result<usize> {
        Ok(match self.output()? {
            Shape::Flat(n) => n,
            Shape::Seq(t, n) => t * n,
        })
    }

    pub fn window(&self) -> Option<usize> {
        match self.input {
            Shape::Seq(t, _) => Some(t),
            Shape::Flat(_) => None,
        }
    }

    pub fn with_window(mut self, window: usize) -> Result<ModelSpec> {
        match self.input {
            Shape::Seq(_, f) if window > 0 => self.input = Shape::Seq(window, f),
            _ => return Err(Error::invalid("window applies only to sequence models")),
        }
        Ok(self)
    }

    pub fn with_dropout(mut self, rate: f64) -> ModelSpec {
        for l in &mut self.layers {
            if let LayerSpec::Dropout { rate: r } = l {
                *r = rate;
            }
        }
        self
    }

    pub fn param_shapes(&self) -> Result<Vec<(usize, usize)>> {
        Ok(self.plan()?.into_iter().flat_map(|p| p.params).collect())
    }
}

/// Trainable parameter total.
pub fn param_count(spec: &ModelSpec) -> Result<usize> {
    Ok(spec.param_shapes()?.iter().map(|(r, c)| r * c).sum())
}

fn hidden_dense_stack(widths: &[usize], l2: f64) -> Vec<LayerSpec> {
    let mut v: Vec<LayerSpec> = widths
        .iter()
        .map(|&u| LayerSpec::Dense {
            units: u,
            activation: Activation::Relu,
            l2,
        })
        .collect();
    v.push(LayerSpec::dense(1, Activation::Linear));
    v
}

fn recurrent_dense(kind: ModelKind, units: usize, dense: &[usize], rate: f64) -> Vec<LayerSpec> {
    let rnn = |seq| match kind {
        ModelKind::GruDense => LayerSpec::Gru {
            units,
            return_sequences: seq,
        },
        _ => LayerSpec::lstm(units, seq),
    };
    let mut v = vec![rnn(true), LayerSpec::Dropout { rate }, rnn(false), LayerSpec::Flatten];
    v.extend(hidden_dense_stack(dense, 0.0));
    v
}

fn seq2seq(encoder: usize, state: usize, rate: f64) -> Vec<LayerSpec> {
    vec![
        LayerSpec::lstm(encoder, true),
        LayerSpec::Lstm {
            units: state,
            return_sequences: false,
            return_state: true,
            initial_state: false,
        },
        LayerSpec::RepeatVector { n: 1 },
        LayerSpec::Lstm {
            units: state,
            return_sequences: true,
            return_state: false,
            initial_state: true,
        },
        LayerSpec::Dropout { rate },
        LayerSpec::TimeDistributedDense {
            units: 1,
            activation: Activation::Linear,
        },
    ]
}

/// The reference architecture stacks.
pub fn build_model(kind: ModelKind) -> ModelSpec {
    let seq_input = Shape::Seq(DEFAULT_WINDOW, 1);
    let (input, layers) = match kind {
        ModelKind::DenseMlp => {
            let mut layers: Vec<LayerSpec> = [1024, 512, 256, 128]
                .iter()
                .map(|&u| LayerSpec::Dense {
                    units: u,
                    activation: Activation::Relu,
                    l2: DEFAULT_L2,
                })
                .collect();
            layers.extend(hidden_dense_stack(&[64, 32, 8], 0.0));
            (Shape::Flat(MLP_INPUT_WIDTH), layers)
        }
        ModelKind::LstmOnly => (
            seq_input,
            vec![
                LayerSpec::lstm(352, true),
                LayerSpec::lstm(160, true),
                LayerSpec::lstm(128, false),
                LayerSpec::Dropout { rate: DEFAULT_DROPOUT },
                LayerSpec::dense(1, Activation::Linear),
            ],
        ),
        ModelKind::LstmDense | ModelKind::GruDense => (
            seq_input,
            recurrent_dense(kind, 128, &[256, 128, 64, 32, 16], DEFAULT_DROPOUT),
        ),
        ModelKind::Seq2Seq => (seq_input, seq2seq(64, 160, DEFAULT_DROPOUT)),
    };
    ModelSpec { kind, input, layers }
}

/// Same topology as [`build_model`] with every width set to `units` and a
/// short window; used for gradient checks.
pub fn miniature(kind: ModelKind, units: usize, window: usize) -> ModelSpec {
    let spec = build_model(kind);
    let layers = spec
        .layers
        .into_iter()
        .map(|l| match l {
            LayerSpec::Dense { units: 1, .. } | LayerSpec::TimeDistributedDense { units: 1, .. } => l,
            LayerSpec::Dense { activation, l2, .. } => LayerSpec::Dense { units, activation, l2 },
            LayerSpec::Lstm {
                return_sequences,
                return_state,
                initial_state,
                ..
            } => LayerSpec::Lstm {
                units,
                return_sequences,
                return_state,
                initial_state,
            },
            LayerSpec::Gru { return_sequences, .. } => LayerSpec::Gru { units, return_sequences },
            other => other,
        })
        .collect();
    let input = match spec.input {
        Shape::Seq(_, f) => Shape::Seq(window, f),
        flat => flat,
    };
    ModelSpec { kind, input, layers }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_totals() {
        let expect = [
            (ModelKind::DenseMlp, 705_777),
            (ModelKind::LstmOnly, 974_849),
            (ModelKind::LstmDense, 274_945),
            (ModelKind::GruDense, 226_177),
            (ModelKind::Seq2Seq, 366_497),
        ];
        for (kind, total) in expect {
            assert_eq!(param_count(&build_model(kind)).unwrap(), total, "{kind}");
        }
    }

    #[test]
    fn single_layer_counts() {
        let d = ModelSpec {
            kind: ModelKind::DenseMlp,
            input: Shape::Flat(5),
            layers: vec![LayerSpec::dense(1024, Activation::Relu)],
        };
        assert_eq!(param_count(&d).unwrap(), (5 + 1) * 1024);
        let g = ModelSpec {
            kind: ModelKind::GruDense,
            input: Shape::Seq(100, 1),
            layers: vec![LayerSpec::Gru {
                units: 128,
                return_sequences: false,
            }],
        };
        assert_eq!(param_count(&g).unwrap(), 3 * (128 + 128 * 128 + 256));
        assert_eq!(param_count(&g).unwrap(), 50_304);
    }

    #[test]
    fn layer_kinds() {
        let mlp = build_model(ModelKind::DenseMlp);
        assert_eq!(mlp.layers.iter().filter(|l| l.is_parameterized()).count(), 8);
        let kinds: Vec<_> = build_model(ModelKind::LstmOnly).layers.iter().map(|l| l.kind_name()).collect();
        assert_eq!(kinds, ["LSTM", "LSTM", "LSTM", "Dropout", "Dense"]);
        let s2s = build_model(ModelKind::Seq2Seq);
        assert_eq!(s2s.layers.iter().filter(|l| l.kind_name() == "RepeatVector").count(), 1);
        assert_eq!(s2s.layers.iter().filter(|l| l.kind_name() == "TimeDistributed").count(), 1);
        assert_eq!(s2s.output_width().unwrap(), 1);
    }

    #[test]
    fn counts_independent_of_window() {
        for kind in ModelKind::ALL.into_iter().filter(|k| k.is_sequence()) {
            let a = param_count(&build_model(kind)).unwrap();
            let b = param_count(&build_model(kind).with_window(7).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn names_parse() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert_eq!("seq2seq".parse::<ModelKind>().unwrap(), ModelKind::Seq2Seq);
        assert_eq!("dense-mlp".parse::<ModelKind>().unwrap(), ModelKind::DenseMlp);
        assert!("transformer".parse::<ModelKind>().is_err());
    }

    #[test]
    fn bad_chains_rejected() {
        let s = ModelSpec {
            kind: ModelKind::DenseMlp,
            input: Shape::Flat(5),
            layers: vec![LayerSpec::lstm(3, false)],
        };
        assert!(s.plan().is_err());
        let s = ModelSpec {
            kind: ModelKind::Seq2Seq,
            input: Shape::Seq(4, 1),
            layers: vec![LayerSpec::Lstm {
                units: 3,
                return_sequences: false,
                return_state: true,
                initial_state: false,
            }],
        };
        assert!(s.plan().is_err());
    }
}
