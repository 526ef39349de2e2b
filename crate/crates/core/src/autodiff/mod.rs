//! Dense tensors, a reverse-mode tape and first-order optimizers.

mod optim;
mod tape;
mod tensor;

pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::{groupsort_forward, linear_forward, pairwise_sq_dist, relu, sigmoid, softplus};
