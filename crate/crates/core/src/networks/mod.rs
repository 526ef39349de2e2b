//! Network architectures, Lipschitz projections, random projections and the
//! memorizing decoder.

mod checkpoint;
mod jl;
mod memorize;
mod mlp;
mod norms;

pub use checkpoint::{load_mlp, save_mlp, CHECKPOINT_MAGIC};
pub use jl::{distortion, jl_dimension, jl_projection, LinearMap};
pub use memorize::{build_memorizing_decoder, memorization_capacity, MemorizingDecoder, MAX_REFERENCE};
pub use mlp::{collect_grads, Activation, Mlp, MlpSpec, OutputTransform};
pub use norms::{constrain_lipschitz, constrain_norms, operator_norm, project_matrix, NormKind};

/// Standalone GroupSort on a batch: each group of columns sorted in
/// descending order.
pub fn groupsort(x: &crate::Tensor, group_size: usize) -> crate::Result<crate::Tensor> {
    crate::autodiff::groupsort_forward(x, group_size).map(|(y, _)| y)
}
