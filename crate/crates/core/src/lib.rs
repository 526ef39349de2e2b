//! Wasserstein autoencoders as density estimators.
//!
//! The crate is organised by concern:
//!
//! * [`autodiff`]: dense tensors, a reverse-mode tape and first-order optimizers.
//! * [`networks`]: feed-forward architectures, GroupSort, norm projections,
//!   random projections and a memorizing decoder.
//! * [`divergences`]: kernels, MMD, exact and entropic transport, histogram
//!   TV/JS and the Scheffé tournament.
//! * [`kde`]: kernel density estimates and the robust-KDE rate experiment.
//! * [`data`]: samplers, contamination and MNIST ingestion.
//! * [`training`]: WAE-MMD and WAE-GAN training and evaluation.
//! * [`stats`]: Fasano-Franceschini and Cramér two-sample tests.

pub mod autodiff;
pub mod data;
pub mod divergences;
pub mod error;
pub mod kde;
pub mod networks;
pub mod stats;
pub mod training;

pub use autodiff::{OptimizerConfig, OptimizerKind, OptimizerState, Tape, Tensor, Var};
pub use data::{ContaminationLaw, ContaminationSpec, Dataset, LatentLawSpec};

pub use divergences::{FiniteGroup, KernelSpec, Metric};
pub use error::{Error, Result};
pub use networks::{Activation, LinearMap, Mlp, MlpSpec, OutputTransform};
pub use training::{Divergence, MetricRecord, WaeConfig, WaeState};

