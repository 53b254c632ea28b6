use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Linear,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative at pre-activation `x`.
    pub fn derivative(self, x: f64) -> f64 {
        self.derivative_from_output(self.apply(x), x)
    }

    /// Derivative given output `y = f(x)`; relu needs `x` for the sign.
    pub fn derivative_from_output(self, y: f64, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn forward(self, pre: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Linear => pre.clone(),
            _ => pre.mapv(|v| self.apply(v)),
        }
    }

    /// `dy ⊙ f'(pre)` with `out = f(pre)`.
    pub fn backward(self, pre: ArrayView2<f64>, out: ArrayView2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
        match self {
            Activation::Linear => dy.to_owned(),
            _ => {
                let mut g = dy.to_owned();
                Zip::from(&mut g)
                    .and(pre)
                    .and(out)
                    .for_each(|g, &x, &y| *g *= self.derivative_from_output(y, x));
                g
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}
