//! Samplers, contamination and dataset ingestion.

mod contamination;
mod dataset;
mod mnist;
mod samplers;
pub mod seeds;

pub use contamination::{
    contaminate, wasserstein_epsilon, ContaminationLaw, ContaminationRecord, ContaminationSpec, EpsilonEstimate,
};
pub use dataset::Dataset;
pub use mnist::{
    load_mnist_idx, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels, IMAGES_MAGIC,
    LABELS_MAGIC,
};
pub use samplers::{
    sample_five_gaussian, sample_latent, GaussianMixture, LatentLawSpec, FIVE_GAUSSIAN_FULL_N,
    FIVE_GAUSSIAN_VERTICES,
};
