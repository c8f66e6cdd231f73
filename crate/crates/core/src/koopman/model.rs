use crate::diffcore::{Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::seeding;

use super::mlp::{Activation, BoundMlp, Mlp, MlpConfig};
use super::operator::{BoundOperator, FormKind, OperatorForm};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub state_dim: usize,
    pub encoding_dim: usize,
    pub form: FormKind,
    /// Hidden widths shared by encoder and decoder. `None` means two layers
    /// of width `max(64, 2·encoding_dim)`.
    pub hidden: Option<Vec<usize>>,
    pub activation: Activation,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(state_dim: usize, encoding_dim: usize, form: FormKind, seed: u64) -> Self {
        Self {
            state_dim,
            encoding_dim,
            form,
            hidden: None,
            activation: Activation::Tanh,
            seed,
        }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden
            .clone()
            .unwrap_or_else(|| vec![64.max(2 * self.encoding_dim); 2])
    }

    pub fn encoder_config(&self) -> MlpConfig {
        let mut widths = vec![self.state_dim];
        widths.extend(self.hidden_widths());
        widths.push(self.encoding_dim);
        MlpConfig {
            widths,
            activation: self.activation,
            seed: seeding::derive(self.seed, 1),
        }
    }

    pub fn decoder_config(&self) -> MlpConfig {
        let mut widths = vec![self.encoding_dim];
        widths.extend(self.hidden_widths().into_iter().rev());
        widths.push(self.state_dim);
        MlpConfig {
            widths,
            activation: self.activation,
            seed: seeding::derive(self.seed, 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::Config("state_dim must be positive".into()));
        }
        self.form
            .check_dim(self.encoding_dim)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.hidden.as_ref().is_some_and(|h| h.is_empty()) {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        Ok(())
    }
}

/// Encoder `E`, operator `K` and decoder `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub config: ModelConfig,
    pub encoder: Mlp,
    pub operator: OperatorForm,
    pub decoder: Mlp,
}

/// Predictions of one rollout from a batch of initial states.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub batch: usize,
    /// `K^i·E(s0)` for i = 1..n, each `B × d` row-major.
    pub latents: Vec<Vec<f64>>,
    /// `R(K^i·E(s0))` for i = 1..n, each `B × state_dim` row-major.
    pub states: Vec<Vec<f64>>,
}

pub fn init_model(
    state_dim: usize,
    encoding_dim: usize,
    form: FormKind,
    seed: u64,
) -> Result<KoopmanModel> {
    KoopmanModel::new(ModelConfig::new(state_dim, encoding_dim, form, seed))
}

impl KoopmanModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let encoder = Mlp::new(config.encoder_config())?;
        let decoder = Mlp::new(config.decoder_config())?;
        let mut rng = seeding::rng(seeding::derive(config.seed, 3));
        let operator = OperatorForm::init(config.form, config.encoding_dim, &mut rng)?;
        Ok(Self {
            config,
            encoder,
            operator,
            decoder,
        })
    }

    /// Assembles a model from explicit parts, checking the width chain.
    pub fn from_parts(encoder: Mlp, operator: OperatorForm, decoder: Mlp, seed: u64) -> Result<Self> {
        let d = operator.dim();
        let state_dim = encoder.config.input_width();
        if encoder.config.output_width() != d
            || decoder.config.input_width() != d
            || decoder.config.output_width() != state_dim
        {
            return Err(Error::Dimension {
                op: "koopman model",
                left: encoder.config.widths.clone(),
                right: decoder.config.widths.clone(),
            });
        }
        let hidden = encoder.config.widths[1..encoder.config.widths.len() - 1].to_vec();
        let config = ModelConfig {
            state_dim,
            encoding_dim: d,
            form: operator.kind(),
            hidden: Some(hidden),
            activation: encoder.config.activation,
            seed,
        };
        Ok(Self {
            config,
            encoder,
            operator,
            decoder,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.config.state_dim
    }

    pub fn encoding_dim(&self) -> usize {
        self.config.encoding_dim
    }

    pub fn operator_matrix(&self) -> Vec<f64> {
        self.operator.matrix()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.operator.param_count() + self.decoder.param_count()
    }

    /// Every parameter in binding order: encoder, operator, decoder.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.encoder.params().collect();
        out.extend(self.operator.params());
        out.extend(self.decoder.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.encoder.params_mut().collect();
        out.extend(self.operator.params_mut());
        out.extend(self.decoder.params_mut());
        out
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundModel> {
        let encoder = self.encoder.bind(tape);
        let operator = self.operator.bind(tape)?;
        let decoder = self.decoder.bind(tape);
        let operator_t = tape.transpose(operator.matrix)?;
        Ok(BoundModel {
            encoder,
            operator,
            decoder,
            operator_t,
        })
    }

    /// Adds one backward sweep's gradients into every parameter.
    pub fn accumulate(&mut self, grads: &Gradients, bound: &BoundModel) -> Result<()> {
        let vars = bound.vars();
        let mut params = self.params_mut();
        debug_assert_eq!(vars.len(), params.len());
        for (v, p) in vars.into_iter().zip(params.iter_mut()) {
            grads.accumulate(v, p)?;
        }
        Ok(())
    }

    fn batch_input(&self, tape: &mut Tape, states: &[f64], width: usize) -> Result<Var> {
        if states.is_empty() || !states.len().is_multiple_of(width) {
            return Err(Error::Dimension {
                op: "batch",
                left: vec![states.len()],
                right: vec![width],
            });
        }
        tape.constant(vec![states.len() / width, width], states.to_vec())
    }

    /// Encodes a row-major `B × state_dim` batch.
    pub fn encode(&self, states: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape)?;
        let x = self.batch_input(&mut tape, states, self.state_dim())?;
        let e = bound.encode(&mut tape, x)?;
        Ok(tape.value(e).to_vec())
    }

    /// Decodes a row-major `B × encoding_dim` batch.
    pub fn decode(&self, latents: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape)?;
        let e = self.batch_input(&mut tape, latents, self.encoding_dim())?;
        let s = bound.decode(&mut tape, e)?;
        Ok(tape.value(s).to_vec())
    }

    /// `R(K^i·E(s0))` for i = 1..n without re-encoding between steps.
    pub fn rollout(&self, s0: &[f64], n: usize) -> Result<Rollout> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape)?;
        let x = self.batch_input(&mut tape, s0, self.state_dim())?;
        let batch = tape.shape(x)[0];
        let e0 = bound.encode(&mut tape, x)?;
        let latents = bound.rollout_latents(&mut tape, e0, n)?;
        let mut states = Vec::with_capacity(n);
        for &e in &latents {
            let s = bound.decode(&mut tape, e)?;
            states.push(tape.value(s).to_vec());
        }
        Ok(Rollout {
            batch,
            latents: latents.iter().map(|&e| tape.value(e).to_vec()).collect(),
            states,
        })
    }
}

/// A model recorded on a tape.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub encoder: BoundMlp,
    pub operator: BoundOperator,
    pub decoder: BoundMlp,
    operator_t: Var,
}

impl BoundModel {
    /// Leaves in the order of [`KoopmanModel::params`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.encoder.vars().collect();
        out.extend(&self.operator.params);
        out.extend(self.decoder.vars());
        out
    }

    pub fn matrix(&self) -> Var {
        self.operator.matrix
    }

    pub fn encode(&self, tape: &mut Tape, states: Var) -> Result<Var> {
        self.encoder.forward(tape, states)
    }

    pub fn decode(&self, tape: &mut Tape, latents: Var) -> Result<Var> {
        self.decoder.forward(tape, latents)
    }

    /// One operator application to a `B × d` batch: each row `e` maps to `K·e`.
    pub fn advance(&self, tape: &mut Tape, e: Var) -> Result<Var> {
        tape.matmul(e, self.operator_t)
    }

    /// Latent iterates `K·e0, …, Kⁿ·e0`.
    pub fn rollout_latents(&self, tape: &mut Tape, e0: Var, n: usize) -> Result<Vec<Var>> {
        if n == 0 {
            return Err(Error::Contract("rollout needs at least one step".into()));
        }
        let mut out = Vec::with_capacity(n);
        let mut e = e0;
        for step in 1..=n {
            e = self.advance(tape, e)?;
            if !tape.value(e).iter().all(|v| v.is_finite()) {
                return Err(Error::RolloutDivergence { step });
            }
            out.push(e);
        }
        Ok(out)
    }
}
