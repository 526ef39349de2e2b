use nalgebra::DMatrix;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::mlp::Mlp;

/// Operator norm used by [`constrain_norms`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Largest singular value.
    Spectral,
    /// `ℓ∞ -> ℓ∞`: maximum absolute row sum.
    Inf,
    /// `ℓ2 -> ℓ∞`: maximum Euclidean row norm.
    TwoToInf,
}

pub fn operator_norm(m: &Tensor, kind: NormKind) -> f64 {
    match kind {
        NormKind::Spectral => {
            let dm = DMatrix::from_row_slice(m.rows(), m.cols(), m.data());
            dm.singular_values().max()
        }
        NormKind::Inf => m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
        NormKind::TwoToInf => m
            .row_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max),
    }
}

/// Smallest rescaling that brings `m` into the norm ball of radius `bound`.
/// Feasible matrices are returned unchanged.
pub fn project_matrix(m: &Tensor, kind: NormKind, bound: f64) -> Tensor {
    match kind {
        NormKind::Spectral => {
            let s = operator_norm(m, kind);
            if s <= bound {
                m.clone()
            } else {
                let c = bound / s;
                m.map(|v| v * c)
            }
        }
        NormKind::Inf | NormKind::TwoToInf => {
            let mut out = m.clone();
            for i in 0..m.rows() {
                let row = out.row_mut(i);
                let size = if kind == NormKind::Inf {
                    row.iter().map(|v| v.abs()).sum::<f64>()
                } else {
                    row.iter().map(|v| v * v).sum::<f64>().sqrt()
                };
                if size > bound {
                    let c = bound / size;
                    row.iter_mut().for_each(|v| *v *= c);
                }
            }
            out
        }
    }
}

fn check_bound(bound: f64) -> Result<()> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::invalid(format!("norm bound must be positive and finite, got {}", bound)));
    }
    Ok(())
}

/// Projects every weight matrix onto `{‖M‖ <= bound}`.
pub fn constrain_norms(mlp: &Mlp, norm: NormKind, bound: f64) -> Result<Mlp> {
    check_bound(bound)?;
    let mut out = mlp.clone();
    for w in out.weights_mut() {
        *w = project_matrix(w, norm, bound);
    }
    Ok(out)
}

/// Lipschitz recipe: `2 -> ∞` norm on the first layer, `∞` norm on the
/// rest. With 1-Lipschitz activations the network is then `bound^L`
/// Lipschitz from `ℓ2` inputs to `ℓ∞` outputs.
pub fn constrain_lipschitz(mlp: &Mlp, bound: f64) -> Result<Mlp> {
    check_bound(bound)?;
    let mut out = mlp.clone();
    for (i, w) in out.weights_mut().iter_mut().enumerate() {
        let kind = if i == 0 { NormKind::TwoToInf } else { NormKind::Inf };
        *w = project_matrix(w, kind, bound);
    }
    Ok(out)
}
