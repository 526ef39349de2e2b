use crate::autodiff::Tensor;
use crate::divergences::{mmd_biased, KernelSpec};
use crate::error::{Error, Result};

use super::train::WaeState;

/// Losses of `(E, D)` and of the conjugated pair `(φ⁻¹∘E, D∘φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugationReport {
    pub recon_original: f64,
    pub recon_conjugated: f64,
    pub latent_original: f64,
    pub latent_conjugated: f64,
    pub lambda: f64,
}

impl ConjugationReport {
    pub fn total_original(&self) -> f64 {
        self.recon_original + self.lambda * self.latent_original
    }

    pub fn total_conjugated(&self) -> f64 {
        self.recon_conjugated + self.lambda * self.latent_conjugated
    }
}

/// Largest entry of `|RᵀR - I|`.
pub fn orthogonality_defect(r: &Tensor) -> Result<f64> {
    if r.shape().len() != 2 || r.rows() != r.cols() {
        return Err(Error::shape("orthogonality_defect", "square matrix", format!("{:?}", r.shape())));
    }
    let rtr = r.transpose().matmul(r)?;
    let k = r.rows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((rtr.get(i, j) - target).abs());
        }
    }
    Ok(worst)
}

fn mean_row_distance(x: &Tensor, y: &Tensor) -> f64 {
    let n = x.rows();
    (0..n)
        .map(|i| x.row(i).iter().zip(y.row(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum::<f64>()
        / n as f64
}

/// Evaluates the WAE objective for `(E, D)` and for `(φ⁻¹∘E, D∘φ)` with
/// `φ(z) = zR` acting on row vectors.
///
/// The conjugated decoder receives `φ(φ⁻¹(E(x)))`; for rotations with
/// entries in `{0, ±1}` this is bit-identical to `E(x)`. When
/// `rotate_prior` is set the prior draw is mapped through `φ⁻¹` as well.
pub fn conjugation_check(
    state: &WaeState,
    rotation: &Tensor,
    data: &Tensor,
    prior: &Tensor,
    kernel: &KernelSpec,
    lambda: f64,
    rotate_prior: bool,
) -> Result<ConjugationReport> {
    let k = state.latent_dim();
    if rotation.shape() != [k, k] {
        return Err(Error::shape("conjugation_check", format!("[{}, {}]", k, k), format!("{:?}", rotation.shape())));
    }
    let defect = orthogonality_defect(rotation)?;
    if defect > 1e-10 {
        return Err(Error::invalid(format!("rotation is not orthogonal (defect {:e})", defect)));
    }
    let rt = rotation.transpose();
    let z = state.encoder.forward(data)?;
    let xh = state.decoder.forward(&z)?;
    let z_conj = z.matmul(&rt)?;
    let xh_conj = state.decoder.forward(&z_conj.matmul(rotation)?)?;
    let prior_conj = if rotate_prior { prior.matmul(&rt)? } else { prior.clone() };
    Ok(ConjugationReport {
        recon_original: mean_row_distance(data, &xh),
        recon_conjugated: mean_row_distance(data, &xh_conj),
        latent_original: mmd_biased(&z, prior, kernel)?,
        latent_conjugated: mmd_biased(&z_conj, &prior_conj, kernel)?,
        lambda,
    })
}
