//! Discrepancy measures between samples: kernels and MMD, group
//! symmetrization, exact and entropic transport, histogram TV/JS and the
//! Scheffé tournament.

mod assignment;
mod group;
mod histogram;
mod kernel;
mod mmd;
mod scheffe;
mod sinkhorn;
mod symmetry;
mod wasserstein;

pub use assignment::{linear_assignment, transportation_simplex};
pub use group::FiniteGroup;
pub use histogram::{hist_js, hist_tv, js_from_masses, tv_from_masses, HistogramGrid, DEFAULT_BINS};
pub use kernel::{invariance_defect, KernelSpec};
pub use mmd::{mmd_biased, mmd_sq_biased, mmd_sq_unbiased};
pub use scheffe::{scheffe_select, DensityCandidate, ScheffeOutcome, SCHEFFE_DRAWS};
pub use sinkhorn::{w1_sinkhorn, SinkhornResult};
pub use symmetry::{canonicalize, estimate_varsigma, symmetrize, varsigma_on_probes};
pub use wasserstein::{cost_matrix, w1_exact, w1_exact_capped, Metric, W1Estimate, W1_EXACT_CAP};
