//! Koopman autoencoder: encoder `E`, latent operator `K`, decoder `R`, with
//! predictions `s_n ≈ R(Kⁿ·E(s_0))`.

mod checkpoint;
mod mlp;
mod model;
mod operator;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use mlp::{Activation, BoundMlp, Mlp, MlpConfig};
pub use model::{init_model, BoundModel, KoopmanModel, ModelConfig, Rollout};
pub use operator::{BoundOperator, FormKind, OperatorForm};
