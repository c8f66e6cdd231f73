//! Seeded mini-batch training with per-epoch test evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::diffcore::{clip_gradients, Adam, AdamConfig, Tape};
use crate::dynamics::Dataset;
use crate::error::{Error, Result};
use crate::koopman::KoopmanModel;
use crate::losses::{self, Batch, LossBreakdown, LossConfig, LossState};
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient-norm bound; `None` disables clipping.
    pub clip: Option<f64>,
    pub seed: u64,
    pub loss: LossConfig,
    /// Evaluate the test error every this many epochs (and after the last).
    pub eval_interval: usize,
    /// Record wall time; when off every time reads 0.
    pub timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: AdamConfig::default().lr,
            clip: Some(1.0),
            seed: 0,
            loss: LossConfig::default(),
            eval_interval: 1,
            timing: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip must be positive, got {c}")));
            }
        }
        if self.eval_interval == 0 || (self.epochs > 0 && self.eval_interval > self.epochs) {
            return Err(Error::Config(format!(
                "eval_interval must lie in 1..={}, got {}",
                self.epochs.max(1),
                self.eval_interval
            )));
        }
        Ok(())
    }

    /// Epochs (1-based) after which the test error is recorded.
    pub fn eval_epochs(&self) -> Vec<usize> {
        eval_epochs(self.epochs, self.eval_interval)
    }
}

pub fn eval_epochs(epochs: usize, interval: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=epochs).filter(|e| e % interval.max(1) == 0).collect();
    if epochs > 0 && out.last() != Some(&epochs) {
        out.push(epochs);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    /// Non-finite rollout, loss or gradient during `epoch`.
    Diverged { epoch: usize, reason: String },
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged { .. } => "diverged",
        }
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches; `None` after divergence.
    pub train: Option<LossBreakdown>,
    /// Mean full-accuracy error on the test set; `+∞` after divergence.
    pub test_error: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub records: Vec<EvalRecord>,
    /// Mean total training loss of every completed epoch.
    pub epoch_losses: Vec<f64>,
    pub status: RunStatus,
}

impl History {
    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.test_error)
    }
}

/// Mean full-accuracy rollout error over the test trajectories.
pub fn evaluate(model: &KoopmanModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Domain("empty test set".into()));
    }
    if test.state_dim != model.state_dim() {
        return Err(Error::Dimension {
            op: "evaluate",
            left: vec![model.state_dim()],
            right: vec![test.state_dim],
        });
    }
    const CHUNK: usize = 256;
    let mut weighted = 0.0;
    for chunk in test.trajectories.chunks(CHUNK) {
        let refs: Vec<_> = chunk.iter().collect();
        let batch = Batch::from_trajectories(&refs)?;
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape)?;
        let fw = losses::forward(&mut tape, &bound, &batch, false)?;
        let err = losses::terms::full_accuracy(&mut tape, fw.preds, fw.targets, batch.n_steps)?;
        weighted += tape.scalar(err) * chunk.len() as f64;
    }
    Ok(weighted / test.len() as f64)
}

enum Step {
    Done(LossBreakdown),
    Diverged(String),
}

fn train_step(
    model: &mut KoopmanModel,
    adam: &mut Adam,
    batch: &Batch,
    cfg: &TrainConfig,
    state: &mut LossState,
) -> Result<Step> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape)?;
    let objective = match losses::total_loss(&mut tape, &bound, batch, &cfg.loss, state) {
        Ok(o) => o,
        Err(e) if e.is_divergence() => return Ok(Step::Diverged(e.to_string())),
        Err(e) => return Err(e),
    };
    if !objective.breakdown.is_finite() {
        return Ok(Step::Diverged("non-finite training loss".into()));
    }
    let grads = tape.backward(objective.total)?;
    model.accumulate(&grads, &bound)?;
    let mut params = model.params_mut();
    let finite = params
        .iter()
        .all(|p| p.grad().is_some_and(|g| g.iter().all(|v| v.is_finite())));
    if !finite {
        params.iter_mut().for_each(|p| p.zero_grad());
        return Ok(Step::Diverged("non-finite gradient".into()));
    }
    if let Some(max_norm) = cfg.clip {
        clip_gradients(&mut params, max_norm)?;
    }
    adam.step(&mut params)?;
    Ok(Step::Done(objective.breakdown))
}

/// Trains `model` in place and returns its evaluation history. A run whose
/// rollout, loss or gradient turns non-finite stops early and is recorded as
/// diverged with infinite error at every remaining evaluation epoch.
pub fn fit(model: &mut KoopmanModel, train: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    cfg.loss.validate(model.config.form, train.equation)?;
    for ds in [train, test] {
        if ds.state_dim != model.state_dim() {
            return Err(Error::Dimension {
                op: "fit",
                left: vec![model.state_dim()],
                right: vec![ds.state_dim],
            });
        }
    }
    if train.is_empty() {
        return Err(Error::Domain("empty training set".into()));
    }

    let start = Instant::now();
    let elapsed = || if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    })?;
    let mut state = LossState::new(seeding::derive(cfg.seed, u64::MAX));
    let schedule = cfg.eval_epochs();
    let mut history = History {
        records: Vec::with_capacity(schedule.len()),
        epoch_losses: Vec::with_capacity(cfg.epochs),
        status: RunStatus::Ok,
    };

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seeding::rng(seeding::derive(cfg.seed, epoch as u64)));
        let mut parts = Vec::new();
        let mut failure = None;
        for ids in order.chunks(cfg.batch_size) {
            let refs: Vec<_> = ids.iter().map(|&i| &train.trajectories[i]).collect();
            let batch = Batch::from_trajectories(&refs)?;
            match train_step(model, &mut adam, &batch, cfg, &mut state)? {
                Step::Done(b) => parts.push(b),
                Step::Diverged(reason) => {
                    failure = Some(reason);
                    break;
                }
            }
        }

        let mut test_error = None;
        if failure.is_none() && schedule.contains(&epoch) {
            match evaluate(model, test) {
                Ok(e) if e.is_finite() => test_error = Some(e),
                Ok(_) => failure = Some("non-finite test error".into()),
                Err(e) if e.is_divergence() => failure = Some(format!("test {e}")),
                Err(e) => return Err(e),
            }
        }

        if let Some(reason) = failure {
            let now = elapsed();
            for &e in schedule.iter().filter(|&&e| e >= epoch) {
                history.records.push(EvalRecord {
                    epoch: e,
                    train: None,
                    test_error: f64::INFINITY,
                    wall_time_s: now,
                });
            }
            history.status = RunStatus::Diverged { epoch, reason };
            return Ok(history);
        }

        let mean = LossBreakdown::mean(&parts);
        history.epoch_losses.push(mean.total);
        if let Some(test_error) = test_error {
            history.records.push(EvalRecord {
                epoch,
                train: Some(mean),
                test_error,
                wall_time_s: elapsed(),
            });
        }
    }
    Ok(history)
}
