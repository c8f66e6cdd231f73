//! Loss terms and the objective assembled from a [`LossConfig`].
//!
//! Accuracy terms compare rollout predictions with targets. Encoding terms
//! constrain the encoder and decoder. Operator terms push `K` towards a
//! unitary map. Auxiliary terms add problem-specific penalties.

mod config;
mod determinant;
mod objective;
pub mod terms;

pub use config::{Accuracy, Auxiliary, Embedding, IsometrySamples, LossConfig, OperatorLoss, Weights};
pub use determinant::{det_jordan, det_jordan_grad, det_tridiagonal, det_tridiagonal_grad, determinant_var};
pub use objective::{forward, total_loss, Batch, Forward, LossBreakdown, LossState, Objective};
