//! Koopman autoencoder experimentation stack.
//!
//! * [`diffcore`]: tensors, reverse-mode tape, Adam, gradient clipping
//! * [`dynamics`]: reference ODE/PDE solvers and dataset files
//! * [`koopman`]: encoder/decoder MLPs, operator forms, latent rollout
//! * [`losses`]: accuracy, encoding, operator and auxiliary loss terms
//! * [`training`]: the seeded training loop and test evaluation
//! * [`gridsearch`]: combination enumeration, parallel runs, aggregate reports

pub mod diffcore;
pub mod dynamics;
pub mod error;
pub mod gridsearch;
pub mod koopman;
pub mod losses;
pub mod seeding;
pub mod training;

pub use error::{Error, Result};
