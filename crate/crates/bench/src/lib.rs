//! Shared fixtures for the benchmarks.

use densiwae::data::seeds;
use densiwae::{LatentLawSpec, Tensor};

/// `n` standard normal points in `d` dimensions.
pub fn gaussian_cloud(n: usize, d: usize, seed: u64) -> Tensor {
    LatentLawSpec::gaussian(d).draw(n, &mut seeds::rng(seed)).expect("valid law")
}
