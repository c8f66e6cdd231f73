use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::diffcore::{Tape, Var};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::koopman::BoundModel;
use crate::seeding::{self, Rng};

use super::config::{Accuracy, Auxiliary, Embedding, IsometrySamples, LossConfig, OperatorLoss};
use super::terms;

/// States of `B` trajectories of equal length, stacked step-major:
/// row `i·B + b` is state `i` (0..=n) of trajectory `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub n_steps: usize,
    pub state_dim: usize,
    pub states: Vec<f64>,
}

impl Batch {
    pub fn from_trajectories(trajectories: &[&Trajectory]) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::Domain("empty batch".into()))?;
        let (n, s) = (first.n_steps(), first.state_dim);
        if n == 0 {
            return Err(Error::Contract("trajectories need at least one step".into()));
        }
        for t in trajectories {
            if t.state_dim != s || t.n_steps() != n {
                return Err(Error::Dimension {
                    op: "batch",
                    left: vec![n + 1, s],
                    right: vec![t.n_steps() + 1, t.state_dim],
                });
            }
        }
        let b = trajectories.len();
        let mut states = Vec::with_capacity((n + 1) * b * s);
        for i in 0..=n {
            for t in trajectories {
                states.extend_from_slice(t.state(i));
            }
        }
        Ok(Self {
            size: b,
            n_steps: n,
            state_dim: s,
            states,
        })
    }

    fn rows(&self, from: usize, to: usize) -> Vec<f64> {
        let w = self.size * self.state_dim;
        self.states[from * w..to * w].to_vec()
    }
}

/// Randomness and warm-start data carried between loss evaluations.
#[derive(Debug, Clone)]
pub struct LossState {
    rng: Rng,
    power_vector: Option<Vec<f64>>,
}

impl LossState {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: seeding::rng(seed),
            power_vector: None,
        }
    }

    pub fn power_vector(&self) -> Option<&[f64]> {
        self.power_vector.as_deref()
    }

    fn power_start(&mut self, d: usize) -> Vec<f64> {
        match &self.power_vector {
            Some(v) if v.len() == d && v.iter().all(|x| x.is_finite()) => v.clone(),
            _ => {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut self.rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            }
        }
    }

    /// A cyclic permutation of `0..m` (no fixed points) by Sattolo's algorithm.
    pub fn derangement(&mut self, m: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            let j = self.rng.random_range(0..i);
            p.swap(i, j);
        }
        p
    }

    fn normal_samples(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| StandardNormal.sample(&mut self.rng)).collect()
    }
}

/// Unweighted term values and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub accuracy: f64,
    pub embedding: Option<f64>,
    pub operator: Option<f64>,
    pub auxiliary: Option<f64>,
    pub total: f64,
}

impl LossBreakdown {
    /// Element-wise mean of several breakdowns with the same active terms.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len() as f64;
        let avg = |f: &dyn Fn(&LossBreakdown) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = items.iter().map(f).collect();
            vals.map(|v| v.iter().sum::<f64>() / n)
        };
        LossBreakdown {
            accuracy: avg(&|b| Some(b.accuracy)).unwrap_or(f64::NAN),
            embedding: avg(&|b| b.embedding),
            operator: avg(&|b| b.operator),
            auxiliary: avg(&|b| b.auxiliary),
            total: avg(&|b| Some(b.total)).unwrap_or(f64::NAN),
        }
    }

    pub fn is_finite(&self) -> bool {
        [Some(self.accuracy), self.embedding, self.operator, self.auxiliary, Some(self.total)]
            .iter()
            .flatten()
            .all(|v| v.is_finite())
    }
}

/// Tape nodes of one batched rollout.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    /// All `(n+1)·B` states.
    pub states: Var,
    /// `E` of all states, present when requested.
    pub encoded: Option<Var>,
    pub e0: Var,
    /// `K^i·E(v_0)` for i = 1..n, stacked step-major.
    pub latents: Var,
    /// Decoded latents, stacked step-major.
    pub preds: Var,
    /// `v_1 … v_n`, stacked step-major.
    pub targets: Var,
}

pub fn forward(tape: &mut Tape, model: &BoundModel, batch: &Batch, encode_all: bool) -> Result<Forward> {
    let (b, n, s) = (batch.size, batch.n_steps, batch.state_dim);
    let states = tape.constant(vec![(n + 1) * b, s], batch.states.clone())?;
    let (encoded, e0) = if encode_all {
        let z = model.encode(tape, states)?;
        let first: Vec<usize> = (0..b).collect();
        (Some(z), tape.gather_rows(z, &first)?)
    } else {
        let x0 = tape.constant(vec![b, s], batch.rows(0, 1))?;
        (None, model.encode(tape, x0)?)
    };
    let steps = model.rollout_latents(tape, e0, n)?;
    let latents = tape.concat_rows(&steps)?;
    let preds = model.decode(tape, latents)?;
    let targets = tape.constant(vec![n * b, s], batch.rows(1, n + 1))?;
    Ok(Forward {
        states,
        encoded,
        e0,
        latents,
        preds,
        targets,
    })
}

/// The weighted objective node and its breakdown.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    pub total: Var,
    pub breakdown: LossBreakdown,
}

/// Builds the weighted sum of the configured terms for one batch.
pub fn total_loss(
    tape: &mut Tape,
    model: &BoundModel,
    batch: &Batch,
    cfg: &LossConfig,
    state: &mut LossState,
) -> Result<Objective> {
    let n = batch.n_steps;
    let encode_all = cfg.embedding != Embedding::None
        || (cfg.operator == OperatorLoss::Isometry
            && cfg.isometry_source == IsometrySamples::EncodedStates);
    let fw = forward(tape, model, batch, encode_all)?;

    let accuracy = match cfg.accuracy {
        Accuracy::Full => terms::full_accuracy(tape, fw.preds, fw.targets, n)?,
        Accuracy::Max => terms::max_accuracy(tape, fw.preds, fw.targets, n)?,
        Accuracy::Discounted(l) => terms::discounted_accuracy(tape, fw.preds, fw.targets, n, l)?,
    };

    let embedding = match cfg.embedding {
        Embedding::None => None,
        Embedding::Reconstruction => {
            let z = fw.encoded.expect("encoded states");
            let back = model.decode(tape, z)?;
            Some(terms::mean_sq_distance(tape, back, fw.states)?)
        }
        Embedding::Consistency => {
            let z = fw.encoded.expect("encoded states");
            let later: Vec<usize> = (batch.size..(n + 1) * batch.size).collect();
            let targets = tape.gather_rows(z, &later)?;
            Some(terms::mean_sq_distance(tape, fw.latents, targets)?)
        }
        Embedding::Metric => {
            let z = fw.encoded.expect("encoded states");
            let m = (n + 1) * batch.size;
            if m < 2 {
                return Err(Error::Contract("metric loss needs at least two states".into()));
            }
            let pairing = state.derangement(m);
            Some(terms::metric(tape, z, fw.states, &pairing)?)
        }
    };

    let k = model.matrix();
    let d = model.operator.d;
    let operator = match cfg.operator {
        OperatorLoss::None => None,
        OperatorLoss::Norm => {
            let start = state.power_start(d);
            let (loss, last) = terms::norm_loss(tape, k, &start, cfg.power_iterations)?;
            state.power_vector = Some(last);
            Some(loss)
        }
        OperatorLoss::Isometry => {
            let z = match cfg.isometry_source {
                IsometrySamples::Latent => {
                    let m = cfg.isometry_samples;
                    let values = state.normal_samples(m * d);
                    tape.constant(vec![m, d], values)?
                }
                IsometrySamples::EncodedStates => fw.encoded.expect("encoded states"),
            };
            Some(terms::isometry_loss(tape, k, z)?)
        }
        OperatorLoss::Unitary => Some(terms::unitary_loss(tape, k)?),
        OperatorLoss::Determinant => Some(terms::determinant_loss(tape, &model.operator)?),
    };

    let auxiliary = match cfg.auxiliary {
        Auxiliary::None => None,
        Auxiliary::AbsoluteMax => Some(terms::absolute_max(tape, fw.preds, fw.targets, n)?),
        Auxiliary::Energy => {
            let pred0 = model.decode(tape, fw.e0)?;
            Some(terms::energy_loss(tape, fw.preds, pred0, n)?)
        }
    };

    let w = cfg.weights;
    let mut total = tape.scale(accuracy, w.accuracy);
    for (term, weight) in [
        (embedding, w.embedding),
        (operator, w.operator),
        (auxiliary, w.auxiliary),
    ] {
        if let Some(t) = term {
            let scaled = tape.scale(t, weight);
            total = tape.add(total, scaled)?;
        }
    }
    let breakdown = LossBreakdown {
        accuracy: tape.scalar(accuracy),
        embedding: embedding.map(|v| tape.scalar(v)),
        operator: operator.map(|v| tape.scalar(v)),
        auxiliary: auxiliary.map(|v| tape.scalar(v)),
        total: tape.scalar(total),
    };
    Ok(Objective { total, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::EquationName;

    fn traj(states: Vec<f64>, dim: usize) -> Trajectory {
        Trajectory {
            equation: EquationName::Shm,
            dt: 0.1,
            state_dim: dim,
            states,
        }
    }

    #[test]
    fn batch_is_step_major() {
        let a = traj(vec![0.0, 1.0, 2.0, 3.0], 2);
        let b = traj(vec![10.0, 11.0, 12.0, 13.0], 2);
        let batch = Batch::from_trajectories(&[&a, &b]).unwrap();
        assert_eq!(batch.states, vec![0.0, 1.0, 10.0, 11.0, 2.0, 3.0, 12.0, 13.0]);
        assert_eq!((batch.size, batch.n_steps), (2, 1));
        let c = traj(vec![0.0; 6], 2);
        assert!(Batch::from_trajectories(&[&a, &c]).is_err());
        assert!(Batch::from_trajectories(&[]).is_err());
    }

    #[test]
    fn derangement_has_no_fixed_points() {
        let mut s = LossState::new(4);
        for m in 2..40 {
            let p = s.derangement(m);
            assert!(p.iter().enumerate().all(|(i, &j)| i != j));
            let mut sorted = p.clone();
            sorted.sort();
            assert_eq!(sorted, (0..m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn breakdown_mean() {
        let a = LossBreakdown { accuracy: 1.0, operator: Some(2.0), total: 3.0, ..Default::default() };
        let b = LossBreakdown { accuracy: 3.0, operator: Some(4.0), total: 7.0, ..Default::default() };
        let m = LossBreakdown::mean(&[a, b]);
        assert_eq!((m.accuracy, m.operator, m.embedding, m.total), (2.0, Some(3.0), None, 5.0));
    }
}
