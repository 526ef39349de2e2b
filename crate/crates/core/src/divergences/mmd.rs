use rayon::prelude::*;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::kernel::KernelSpec;

fn check(x: &Tensor, y: &Tensor, op: &'static str) -> Result<()> {
    if x.shape().len() != 2 || y.shape().len() != 2 || x.cols() != y.cols() {
        return Err(Error::shape(op, format!("{:?}", x.shape()), format!("{:?}", y.shape())));
    }
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::invalid(format!("{} needs non-empty samples", op)));
    }
    Ok(())
}

/// `Σ_i Σ_j κ(x_i, y_j)`, skipping `i == j` when `skip_diag`. Row sums are
/// computed in parallel and added in row order, so the result does not
/// depend on the thread count.
pub(crate) fn kernel_sum(x: &Tensor, y: &Tensor, kernel: &KernelSpec, skip_diag: bool) -> f64 {
    let rows: Vec<f64> = (0..x.rows())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let xi = x.row(i);
            let mut s = 0.0;
            for j in 0..y.rows() {
                if skip_diag && i == j {
                    continue;
                }
                s += kernel.eval(xi, y.row(j));
            }
            s
        })
        .collect();
    rows.iter().sum()
}

/// Biased squared MMD `‖K(P̂) - K(Q̂)‖²` (V-statistic).
pub fn mmd_sq_biased(x: &Tensor, y: &Tensor, kernel: &KernelSpec) -> Result<f64> {
    check(x, y, "mmd_biased")?;
    let (n, m) = (x.rows() as f64, y.rows() as f64);
    let kxx = kernel_sum(x, x, kernel, false) / (n * n);
    let kyy = kernel_sum(y, y, kernel, false) / (m * m);
    let kxy = kernel_sum(x, y, kernel, false) / (n * m);
    Ok(kxx + kyy - 2.0 * kxy)
}

/// Hilbert-space distance between the empirical kernel mean embeddings.
pub fn mmd_biased(x: &Tensor, y: &Tensor, kernel: &KernelSpec) -> Result<f64> {
    Ok(mmd_sq_biased(x, y, kernel)?.max(0.0).sqrt())
}

/// Unbiased U-statistic of MMD²; may be negative.
pub fn mmd_sq_unbiased(x: &Tensor, y: &Tensor, kernel: &KernelSpec) -> Result<f64> {
    check(x, y, "mmd_sq_unbiased")?;
    if x.rows() < 2 || y.rows() < 2 {
        return Err(Error::invalid("unbiased MMD needs at least two points per sample"));
    }
    let (n, m) = (x.rows() as f64, y.rows() as f64);
    let kxx = kernel_sum(x, x, kernel, true) / (n * (n - 1.0));
    let kyy = kernel_sum(y, y, kernel, true) / (m * (m - 1.0));
    let kxy = kernel_sum(x, y, kernel, false) / (n * m);
    Ok(kxx + kyy - 2.0 * kxy)
}
