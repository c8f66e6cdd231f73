//! Dense tensors, a reverse-mode tape, gradient clipping and Adam.

mod optim;
mod tape;
mod tensor;

pub use optim::{clip_gradients, Adam, AdamConfig};
pub use tape::{Binary, Gradients, Reduce, Tape, Unary, Var};
pub use tensor::Tensor;
