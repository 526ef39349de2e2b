use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Tensor;
use crate::data::seeds;
use crate::error::{Error, Result};

/// A linear map `x -> A x` stored as a `k x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    matrix: Tensor,
    seed: Option<u64>,
}

impl LinearMap {
    pub fn new(matrix: Tensor, seed: Option<u64>) -> Result<Self> {
        if matrix.shape().len() != 2 || matrix.is_empty() {
            return Err(Error::shape("LinearMap::new", "non-empty k x d matrix", format!("{:?}", matrix.shape())));
        }
        if !matrix.is_finite() {
            return Err(Error::numerical("linear map has non-finite entries"));
        }
        Ok(LinearMap { matrix, seed })
    }

    pub fn identity(d: usize) -> Self {
        LinearMap {
            matrix: Tensor::identity(d),
            seed: None,
        }
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn in_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Applies the map to every row of an `n x d` matrix.
    pub fn apply(&self, points: &Tensor) -> Result<Tensor> {
        if points.shape().len() != 2 || points.cols() != self.in_dim() {
            return Err(Error::shape("LinearMap::apply", self.in_dim(), format!("{:?}", points.shape())));
        }
        points.matmul(&self.matrix.transpose())
    }
}

/// Gaussian random projection `ℝ^d -> ℝ^k` with entries `N(0, 1/k)`.
pub fn jl_projection(d: usize, k: usize, seed: u64) -> Result<LinearMap> {
    if k == 0 || k > d {
        return Err(Error::invalid(format!("projection needs 1 <= k <= d, got k = {}, d = {}", k, d)));
    }
    let mut rng = seeds::rng(seed);
    let scale = 1.0 / (k as f64).sqrt();
    let data = (0..k * d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect();
    LinearMap::new(Tensor::matrix(k, d, data), Some(seed))
}

/// Target dimension `⌈log₂ n / ε²⌉`.
pub fn jl_dimension(n: usize, eps: f64) -> usize {
    ((n as f64).log2() / (eps * eps)).ceil().max(1.0) as usize
}

/// `(min, max)` over distinct point pairs of `‖E(x) - E(y)‖ / ‖x - y‖`.
pub fn distortion(map: &LinearMap, points: &Tensor) -> Result<(f64, f64)> {
    let img = map.apply(points)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..points.rows() {
        for j in i + 1..points.rows() {
            let dx = dist(points.row(i), points.row(j));
            if dx == 0.0 {
                continue;
            }
            let r = dist(img.row(i), img.row(j)) / dx;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if hi == 0.0 && lo.is_infinite() {
        return Err(Error::invalid("distortion needs at least two distinct points"));
    }
    Ok((lo, hi))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
