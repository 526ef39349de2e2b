use std::f64::consts::PI;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Density-type smoothing kernel, applied as a product over coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KdeKernel {
    /// Standard normal density.
    Gaussian,
    /// Indicator of `[-½, ½]`, taking the value `½` on the boundary.
    Uniform,
}

impl KdeKernel {
    pub fn eval_1d(self, u: f64) -> f64 {
        match self {
            KdeKernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            KdeKernel::Uniform => {
                let a = u.abs();
                if a < 0.5 {
                    1.0
                } else if a == 0.5 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    pub fn eval(self, u: &[f64]) -> f64 {
        match self {
            KdeKernel::Gaussian => {
                let r2: f64 = u.iter().map(|v| v * v).sum();
                (-0.5 * r2).exp() / (2.0 * PI).powf(u.len() as f64 / 2.0)
            }
            KdeKernel::Uniform => u.iter().map(|&v| self.eval_1d(v)).product(),
        }
    }

    /// `∫ |κ′|`, the total variation of the 1D kernel.
    pub fn total_variation(self) -> f64 {
        match self {
            KdeKernel::Gaussian => (2.0 / PI).sqrt(),
            KdeKernel::Uniform => 2.0,
        }
    }
}

/// `p̂_h(x) = (1 / (n h^d)) Σ κ((x - x_i) / h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeEstimate {
    samples: Tensor,
    kernel: KdeKernel,
    h: f64,
}

impl KdeEstimate {
    pub fn new(samples: Tensor, kernel: KdeKernel, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {}", h)));
        }
        if samples.shape().len() != 2 || samples.rows() == 0 || samples.cols() == 0 {
            return Err(Error::invalid("kde needs a non-empty n x d sample"));
        }
        Ok(KdeEstimate { samples, kernel, h })
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> KdeKernel {
        self.kernel
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::shape("kde_eval", d, x.len()));
        }
        let mut u = vec![0.0; d];
        let mut s = 0.0;
        for row in self.samples.row_iter() {
            for ((ui, xi), ri) in u.iter_mut().zip(x).zip(row) {
                *ui = (xi - ri) / self.h;
            }
            s += self.kernel.eval(&u);
        }
        Ok(s / (self.samples.rows() as f64 * self.h.powi(d as i32)))
    }
}

/// Trapezoid nodes and weights on `[lo, hi]` with `points` intervals.
pub(crate) fn trapezoid(lo: f64, hi: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let step = (hi - lo) / points as f64;
    let nodes: Vec<f64> = (0..=points).map(|i| lo + step * i as f64).collect();
    let weights = (0..=points)
        .map(|i| if i == 0 || i == points { 0.5 * step } else { step })
        .collect();
    (nodes, weights)
}
