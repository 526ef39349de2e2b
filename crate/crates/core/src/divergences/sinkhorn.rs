use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::wasserstein::{cost_matrix, Metric};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornResult {
    /// `Σ P_ij C_ij` for the entropic plan `P`.
    pub cost: f64,
    pub converged: bool,
    /// `ℓ1` violation of the row marginal at exit.
    pub residual: f64,
    pub iterations: usize,
}

fn logsumexp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + vals.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport between uniform empirical measures with
/// Euclidean ground cost, iterated on dual potentials in the log domain.
///
/// The regularization is annealed geometrically from the cost scale down to
/// `reg`, warm-starting each stage; `max_iter` counts all updates.
pub fn w1_sinkhorn(x: &Tensor, y: &Tensor, reg: f64, max_iter: usize, tol: f64) -> Result<SinkhornResult> {
    if !(reg > 0.0) {
        return Err(Error::invalid(format!("sinkhorn regularization must be positive, got {}", reg)));
    }
    if x.cols() != y.cols() || x.rows() == 0 || y.rows() == 0 {
        return Err(Error::shape("w1_sinkhorn", format!("{:?}", x.shape()), format!("{:?}", y.shape())));
    }
    let (n, m) = (x.rows(), y.rows());
    let c = cost_matrix(x, y, Metric::L2);
    let (log_a, log_b) = (-(n as f64).ln(), -(m as f64).ln());
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    let scale = c.iter().fold(0.0f64, |s, v| s.max(*v)).max(reg);
    let mut eps = scale;
    let mut iterations = 0;
    let mut residual;

    let row_residual = |f: &[f64], g: &[f64], eps: f64| -> f64 {
        (0..n)
            .map(|i| {
                let s: f64 = (0..m).map(|j| ((f[i] + g[j] - c[i * m + j]) / eps).exp()).sum();
                (s - 1.0 / n as f64).abs()
            })
            .sum()
    };

    loop {
        let last_stage = eps <= reg;
        let stage_tol = if last_stage { tol } else { tol.max(1e-3) };
        loop {
            for i in 0..n {
                let row = &c[i * m..(i + 1) * m];
                f[i] = eps * log_a - eps * logsumexp((0..m).map(|j| (g[j] - row[j]) / eps));
            }
            for j in 0..m {
                g[j] = eps * log_b - eps * logsumexp((0..n).map(|i| (f[i] - c[i * m + j]) / eps));
            }
            iterations += 1;
            if iterations % 10 == 0 || iterations >= max_iter {
                residual = row_residual(&f, &g, eps);
                if residual <= stage_tol || iterations >= max_iter {
                    break;
                }
            }
        }
        if last_stage || iterations >= max_iter {
            break;
        }
        eps = (eps * 0.5).max(reg);
    }

    let mut cost = 0.0;
    for i in 0..n {
        for j in 0..m {
            let k = i * m + j;
            cost += ((f[i] + g[j] - c[k]) / reg).exp() * c[k];
        }
    }
    if !cost.is_finite() {
        return Err(Error::numerical("sinkhorn produced a non-finite cost"));
    }
    let converged = eps <= reg && residual <= tol;
    Ok(SinkhornResult {
        cost,
        converged,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses() {
        let a = Tensor::matrix(1, 1, vec![0.0]);
        let b = Tensor::matrix(1, 1, vec![1.0]);
        let r = w1_sinkhorn(&a, &b, 0.005, 10_000, 1e-9).unwrap();
        assert!((r.cost - 1.0).abs() < 0.05);
        assert!(r.converged);
    }

    #[test]
    fn rejects_nonpositive_reg() {
        let a = Tensor::matrix(1, 1, vec![0.0]);
        assert!(w1_sinkhorn(&a, &a, 0.0, 10, 1e-9).is_err());
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let a = Tensor::matrix(3, 1, vec![0.0, 0.4, 1.0]);
        let b = Tensor::matrix(3, 1, vec![0.1, 0.5, 0.9]);
        let r = w1_sinkhorn(&a, &b, 1e-4, 3, 1e-14).unwrap();
        assert!(!r.converged);
        assert!(r.residual.is_finite());
    }
}
