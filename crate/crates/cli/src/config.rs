//! The experiment file: a TOML document with `data`, `model`, `loss`,
//! `train` and `search` sections. Every key is optional except
//! `data.equation`; unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use koopman_core::dynamics::{Equation, EquationName};
use koopman_core::gridsearch::{default_epochs, AccuracyKind, Constraint, SearchSettings, SearchSpace};
use koopman_core::koopman::{Activation, FormKind, ModelConfig};
use koopman_core::losses::{
    Accuracy, Auxiliary, Embedding, IsometrySamples, LossConfig, OperatorLoss, Weights,
};
use koopman_core::training::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub search: SearchSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub equation: String,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    pub grid_points: Option<usize>,
    pub domain_length: Option<f64>,
    pub initial_range: Option<[f64; 2]>,
    pub modes: Option<usize>,
    #[serde(default)]
    pub classical_lorenz: bool,
    #[serde(default)]
    pub stable_fluid: bool,
}

fn default_n_train() -> usize {
    200
}
fn default_n_test() -> usize {
    50
}
fn default_dt() -> f64 {
    0.1
}
fn default_n_steps() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub encoding_dim: usize,
    pub form: String,
    /// Hidden widths of the encoder; the decoder mirrors them.
    pub hidden: Option<Vec<usize>>,
    pub activation: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            encoding_dim: 16,
            form: "tridiagonal".into(),
            hidden: None,
            activation: "tanh".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub accuracy: String,
    pub lambda: Option<f64>,
    pub embedding: String,
    pub operator: String,
    pub auxiliary: String,
    pub weights: WeightsSection,
    pub power_iterations: usize,
    pub isometry_samples: usize,
    pub isometry_source: String,
}

impl Default for LossSection {
    fn default() -> Self {
        let d = LossConfig::default();
        Self {
            accuracy: d.accuracy.name().into(),
            lambda: None,
            embedding: d.embedding.to_string(),
            operator: d.operator.to_string(),
            auxiliary: d.auxiliary.to_string(),
            weights: WeightsSection::default(),
            power_iterations: d.power_iterations,
            isometry_samples: d.isometry_samples,
            isometry_source: d.isometry_source.to_string(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub accuracy: f64,
    pub embedding: f64,
    pub operator: f64,
    pub auxiliary: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        let w = Weights::default();
        Self {
            accuracy: w.accuracy,
            embedding: w.embedding,
            operator: w.operator,
            auxiliary: w.auxiliary,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Defaults to the per-equation search budget.
    pub epochs: Option<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Global gradient-norm bound; 0 disables clipping.
    pub clip: f64,
    pub eval_interval: usize,
    pub seed: u64,
    pub timing: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: None,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            clip: t.clip.unwrap_or(0.0),
            eval_interval: t.eval_interval,
            seed: t.seed,
            timing: t.timing,
        }
    }
}

/// Overrides of the equation's preset search space.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub encoding_dims: Option<Vec<usize>>,
    pub forms: Option<Vec<String>>,
    pub accuracies: Option<Vec<String>>,
    pub discount_factors: Option<Vec<f64>>,
    pub embeddings: Option<Vec<String>>,
    pub operators: Option<Vec<String>>,
    pub auxiliaries: Option<Vec<String>>,
    pub constraints: Option<Vec<String>>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::config(format!("{field}: {e}")))
}

fn parse_all<T: FromStr>(field: &str, values: &[String]) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    values.iter().map(|v| parse(field, v)).collect()
}

fn core<T>(field: &str, r: koopman_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::config(format!("{field}: {e}")))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::config(format!("{}: not UTF-8", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))?;
        Ok((cfg, bytes))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e: toml::de::Error| CliError::config(e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds every core configuration once so errors surface before any run.
    pub fn validate(&self) -> Result<(), CliError> {
        let eq = self.equation()?;
        if !(self.data.dt > 0.0 && self.data.dt.is_finite()) {
            return Err(CliError::config(format!("data.dt must be positive, got {}", self.data.dt)));
        }
        for (field, v) in [
            ("data.n_train", self.data.n_train),
            ("data.n_test", self.data.n_test),
            ("data.n_steps", self.data.n_steps),
        ] {
            if v == 0 {
                return Err(CliError::config(format!("{field} must be positive")));
            }
        }
        let model = self.model_config(self.model.encoding_dim)?;
        core("model", model.validate())?;
        let train = self.train_config()?;
        core("loss", train.loss.validate(model.form, eq.name))?;
        core("train", train.validate())?;
        let space = self.search_space()?;
        core("search", space.enumerate())?;
        if self.search.workers == Some(0) {
            return Err(CliError::config("search.workers must be positive"));
        }
        Ok(())
    }

    pub fn equation_name(&self) -> Result<EquationName, CliError> {
        parse("data.equation", &self.data.equation)
    }

    pub fn equation(&self) -> Result<Equation, CliError> {
        let mut eq = Equation::new(self.equation_name()?);
        if let Some(g) = self.data.grid_points {
            eq.grid_points = g;
        }
        if let Some(l) = self.data.domain_length {
            eq.domain_length = l;
        }
        if let Some([lo, hi]) = self.data.initial_range {
            eq.initial_range = (lo, hi);
        }
        if let Some(m) = self.data.modes {
            eq.modes = m;
        }
        eq.classical_lorenz = self.data.classical_lorenz;
        eq.stable_fluid = self.data.stable_fluid;
        core("data", eq.validate())?;
        Ok(eq)
    }

    pub fn model_config(&self, encoding_dim: usize) -> Result<ModelConfig, CliError> {
        let eq = self.equation()?;
        let form: FormKind = parse("model.form", &self.model.form)?;
        let activation: Activation = parse("model.activation", &self.model.activation)?;
        Ok(ModelConfig {
            state_dim: eq.state_dim(),
            encoding_dim,
            form,
            hidden: self.model.hidden.clone(),
            activation,
            seed: self.train.seed,
        })
    }

    pub fn loss_config(&self) -> Result<LossConfig, CliError> {
        let l = &self.loss;
        let accuracy = Accuracy::from_name(&l.accuracy, l.lambda)
            .map_err(|e| CliError::config(format!("loss.accuracy: {e}")))?;
        Ok(LossConfig {
            accuracy,
            embedding: parse::<Embedding>("loss.embedding", &l.embedding)?,
            operator: parse::<OperatorLoss>("loss.operator", &l.operator)?,
            auxiliary: parse::<Auxiliary>("loss.auxiliary", &l.auxiliary)?,
            weights: Weights {
                accuracy: l.weights.accuracy,
                embedding: l.weights.embedding,
                operator: l.weights.operator,
                auxiliary: l.weights.auxiliary,
            },
            power_iterations: l.power_iterations,
            isometry_samples: l.isometry_samples,
            isometry_source: parse::<IsometrySamples>("loss.isometry_source", &l.isometry_source)?,
        })
    }

    pub fn epochs(&self) -> Result<usize, CliError> {
        Ok(self.train.epochs.unwrap_or(default_epochs(self.equation_name()?)))
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        if !(t.clip >= 0.0) {
            return Err(CliError::config(format!("train.clip must be non-negative, got {}", t.clip)));
        }
        Ok(TrainConfig {
            epochs: self.epochs()?,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            clip: (t.clip > 0.0).then_some(t.clip),
            seed: t.seed,
            loss: self.loss_config()?,
            eval_interval: t.eval_interval,
            timing: t.timing,
        })
    }

    pub fn search_space(&self) -> Result<SearchSpace, CliError> {
        let s = &self.search;
        let mut space = SearchSpace::preset(self.equation_name()?);
        if let Some(v) = &s.encoding_dims {
            space.encoding_dims = v.clone();
        }
        if let Some(v) = &s.forms {
            space.forms = parse_all::<FormKind>("search.forms", v)?;
        }
        if let Some(v) = &s.accuracies {
            space.accuracies = parse_all::<AccuracyKind>("search.accuracies", v)?;
        }
        if let Some(v) = &s.discount_factors {
            space.discount_factors = v.clone();
        }
        if let Some(v) = &s.embeddings {
            space.embeddings = parse_all::<Embedding>("search.embeddings", v)?;
        }
        if let Some(v) = &s.operators {
            space.operators = parse_all::<OperatorLoss>("search.operators", v)?;
        }
        if let Some(v) = &s.auxiliaries {
            space.auxiliaries = parse_all::<Auxiliary>("search.auxiliaries", v)?;
        }
        if let Some(v) = &s.constraints {
            space.constraints = parse_all::<Constraint>("search.constraints", v)?;
        }
        Ok(space)
    }

    pub fn search_settings(&self, workers: Option<usize>) -> Result<SearchSettings, CliError> {
        let workers = workers.or(self.search.workers).unwrap_or(1);
        if workers == 0 {
            return Err(CliError::config("workers must be positive"));
        }
        let model = self.model_config(self.model.encoding_dim)?;
        Ok(SearchSettings {
            train: self.train_config()?,
            hidden: model.hidden,
            activation: model.activation,
            seed: self.train.seed,
            workers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse("[data]\nequation = \"shm\"\n").unwrap();
        assert_eq!(cfg.epochs().unwrap(), 20);
        assert_eq!(cfg.search_space().unwrap().enumerate().unwrap().len(), 216);
        assert_eq!(cfg.train_config().unwrap().clip, Some(1.0));
    }

    #[test]
    fn partial_sections_merge() {
        let cfg = ExperimentConfig::parse(
            "[data]\nequation = \"shm\"\n[model]\nencoding_dim = 8\n[loss]\noperator = \"norm\"\n[loss.weights]\noperator = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.model.form, "tridiagonal");
        let loss = cfg.loss_config().unwrap();
        assert_eq!(loss.operator, OperatorLoss::Norm);
        assert_eq!(loss.weights.operator, 0.5);
        assert_eq!(loss.weights.accuracy, 1.0);
    }

    #[test]
    fn errors_name_the_field() {
        let msg = |text: &str| ExperimentConfig::parse(text).unwrap_err().message;
        assert!(msg("[data]\nequation = \"shm\"\ndt = -0.1\n").contains("data.dt"));
        assert!(msg("[data]\nequation = \"shm\"\nbogus = 1\n").contains("bogus"));
        assert!(msg("[data]\nequation = \"shm\"\n[model]\nform = \"diagonal\"\n").contains("model.form"));
        assert!(msg("[data]\nequation = \"shm\"\n[train]\nlearning_rat = 1\n").contains("learning_rat"));
        assert!(msg("[data]\nequation = \"shm\"\n[model]\nform = \"dense\"\n[loss]\noperator = \"determinant\"\n")
            .contains("loss"));
    }
}
