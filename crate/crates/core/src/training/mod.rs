//! WAE-MMD and WAE-GAN training, evaluation of realized losses, and the
//! conjugation-invariance check.

mod config;
mod conjugation;
mod evaluate;
mod train;

pub use config::{default_kernel, Divergence, WaeConfig};
pub use conjugation::{conjugation_check, orthogonality_defect, ConjugationReport};
pub use evaluate::{
    check_constraint, evaluate, latent_metrics, reconstruction_metrics, write_metrics_csv, LatentMetric,
    MetricRecord, METRICS_CSV_HEADER,
};
pub use train::{train_epochs, train_wae, wae_mmd_objective, WaeObjective, WaeState};
