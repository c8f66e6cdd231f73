use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(Error::Config(format!("unknown activation `{s}`"))),
        }
    }
}

/// Layer widths from input to output, e.g. `[state_dim, 64, 64, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(Error::Config(format!(
                "an MLP needs at least one hidden layer, got widths {:?}",
                self.widths
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config(format!("zero layer width in {:?}", self.widths)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated widths")
    }
}

/// Fully connected network. Layer `l` maps `x ↦ x·W_l + b_l` with `W_l` of
/// shape `in × out`; the activation is applied after every layer but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
}

/// An [`Mlp`] recorded on a tape.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
    pub activation: Activation,
}

impl Mlp {
    /// Weights uniform in `±1/√fan_in`, zero biases.
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeding::rng(config.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in config.widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            weights.push(Tensor::param(vec![fan_in, fan_out], w)?);
            biases.push(Tensor::param(vec![1, fan_out], vec![0.0; fan_out])?);
        }
        Ok(Self {
            config,
            weights,
            biases,
        })
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Tensor::len).sum()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp {
            weights: self.weights.iter().map(|w| tape.leaf(w)).collect(),
            biases: self.biases.iter().map(|b| tape.leaf(b)).collect(),
            activation: self.config.activation,
        }
    }

    /// Parameters in binding order: all weights, then all biases.
    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.weights.iter().chain(&self.biases)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

impl BoundMlp {
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.weights.iter().chain(&self.biases).copied()
    }

    /// Forward pass on a `B × in` batch.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (rows, cols) = match tape.shape(x) {
            [r, c] => (*r, *c),
            s => {
                return Err(Error::Contract(format!("MLP input must be 2-D, got {s:?}")));
            }
        };
        let expected = tape.shape(self.weights[0])[0];
        if cols != expected {
            return Err(Error::Dimension {
                op: "mlp input",
                left: vec![rows, cols],
                right: tape.shape(self.weights[0]).to_vec(),
            });
        }
        let ones = tape.constant(vec![rows, 1], vec![1.0; rows])?;
        let mut h = x;
        let last = self.weights.len() - 1;
        for (l, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let lin = tape.matmul(h, w)?;
            let bias = tape.matmul(ones, b)?;
            h = tape.add(lin, bias)?;
            if l < last {
                h = match self.activation {
                    Activation::Tanh => tape.tanh(h),
                    Activation::Relu => tape.relu(h),
                };
            }
        }
        Ok(h)
    }
}
