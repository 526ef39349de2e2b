use crate::autodiff::Tensor;
use crate::divergences::{w1_exact, KernelSpec, Metric};
use crate::data::seeds;
use crate::error::{Error, Result};

use rand_distr::{Distribution, StandardNormal};

use super::estimate::{trapezoid, KdeEstimate, KdeKernel};

/// Half-width of the quadrature box.
pub const QUAD_RADIUS: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub integral: f64,
    /// `(α, ∫ κ(u) u^α du)` for every multi-index with `1 <= |α| <= N - 1`.
    pub moments: Vec<(Vec<usize>, f64)>,
    pub max_abs_moment: f64,
    pub order: usize,
    pub quad_points: usize,
    /// Set when a quadrature sum was not finite.
    pub divergent: bool,
}

impl RegularityReport {
    /// Whether `∫κ = 1` and the tested moments vanish within tolerance.
    pub fn holds(&self, integral_tol: f64, moment_tol: f64) -> bool {
        !self.divergent && (self.integral - 1.0).abs() <= integral_tol && self.max_abs_moment <= moment_tol
    }
}

fn multi_indices(d: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; d];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            if cur.iter().sum::<usize>() > 0 {
                out.push(cur.clone());
            }
            return;
        }
        for a in 0..=left {
            cur[pos] = a;
            rec(pos + 1, left - a, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, max_total, &mut cur, &mut out);
    out.sort_by_key(|a| (a.iter().sum::<usize>(), std::cmp::Reverse(a.clone())));
    out
}

/// Integral and moments up to order `N - 1` of the `d`-dimensional product
/// kernel, by tensor-product trapezoid quadrature on `[-8, 8]^d` with
/// `quad_points` intervals per axis.
pub fn verify_regularity(kernel: KdeKernel, d: usize, order: usize, quad_points: usize) -> Result<RegularityReport> {
    if d == 0 || d > 3 || order == 0 || quad_points < 2 {
        return Err(Error::invalid("regularity check needs 1 <= d <= 3, N >= 1 and at least 2 intervals"));
    }
    let (nodes, weights) = trapezoid(-QUAD_RADIUS, QUAD_RADIUS, quad_points);
    let alphas = multi_indices(d, order - 1);
    let mut integral = 0.0;
    let mut moments = vec![0.0; alphas.len()];
    let mut idx = vec![0usize; d];
    let mut u = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for a in 0..d {
            u[a] = nodes[idx[a]];
            w *= weights[idx[a]];
        }
        let k = kernel.eval(&u) * w;
        integral += k;
        for (m, alpha) in moments.iter_mut().zip(&alphas) {
            let mono: f64 = u.iter().zip(alpha).map(|(x, &p)| x.powi(p as i32)).product();
            *m += k * mono;
        }
        // odometer over the grid
        let mut a = 0;
        loop {
            if a == d {
                break;
            }
            idx[a] += 1;
            if idx[a] < nodes.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == d {
            break;
        }
    }
    let divergent = !integral.is_finite() || moments.iter().any(|m| !m.is_finite());
    let max_abs_moment = moments.iter().fold(0.0f64, |s, m| s.max(m.abs()));
    Ok(RegularityReport {
        integral,
        moments: alphas.into_iter().zip(moments).collect(),
        max_abs_moment,
        order,
        quad_points,
        divergent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedTvCheck {
    /// `‖K_h(P̂) - K_h(Q̂)‖₁`.
    pub lhs: f64,
    /// `TV(κ) · W1(P̂, Q̂) / h`.
    pub rhs: f64,
}

impl SmoothedTvCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// Compares the `L¹` distance between two smoothed empirical laws on the
/// line with the bound `∫|κ′| · W1 / h`; for the Gaussian kernel the
/// constant is `√(2/π)`.
pub fn smoothed_tv_bound_check(
    p: &[f64],
    q: &[f64],
    kernel: KdeKernel,
    h: f64,
    quad_points: usize,
) -> Result<SmoothedTvCheck> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {}", h)));
    }
    if p.is_empty() || q.is_empty() {
        return Err(Error::invalid("smoothed TV check needs non-empty samples"));
    }
    let pt = Tensor::matrix(p.len(), 1, p.to_vec());
    let qt = Tensor::matrix(q.len(), 1, q.to_vec());
    let kp = KdeEstimate::new(pt.clone(), kernel, h)?;
    let kq = KdeEstimate::new(qt.clone(), kernel, h)?;
    let lo = p.iter().chain(q).fold(f64::INFINITY, |a, &b| a.min(b)) - QUAD_RADIUS * h;
    let hi = p.iter().chain(q).fold(f64::NEG_INFINITY, |a, &b| a.max(b)) + QUAD_RADIUS * h;
    let (nodes, weights) = trapezoid(lo, hi, quad_points);
    let mut lhs = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        lhs += w * (kp.eval(&[*x])? - kq.eval(&[*x])?).abs();
    }
    let w1 = w1_exact(&pt, &qt, Metric::L1)?;
    Ok(SmoothedTvCheck {
        lhs,
        rhs: kernel.total_variation() * w1 / h,
    })
}

/// `max |κ(Gx, y) - κ(x, G⁻¹y)|` over random Gaussian probe pairs, for an
/// orthogonal `G` (so `G⁻¹ = Gᵀ`).
pub fn transformation_defect(kernel: &KernelSpec, g: &Tensor, probes: usize, seed: u64) -> Result<f64> {
    let k = g.rows();
    if g.shape() != [k, k] {
        return Err(Error::shape("transformation_defect", "square matrix", format!("{:?}", g.shape())));
    }
    let gt = g.transpose();
    let orth = gt.matmul(g)?;
    let id = Tensor::identity(k);
    if orth.data().iter().zip(id.data()).any(|(a, b)| (a - b).abs() > 1e-10) {
        return Err(Error::invalid("transformation must be orthogonal"));
    }
    let mut rng = seeds::rng(seed);
    let apply = |m: &Tensor, v: &[f64]| -> Vec<f64> {
        (0..k).map(|r| m.row(r).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    };
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = kernel.eval(&apply(g, &x), &y);
        let b = kernel.eval(&x, &apply(&gt, &y));
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_order_two() {
        let r = verify_regularity(KdeKernel::Gaussian, 1, 2, 4096).unwrap();
        assert!((r.integral - 1.0).abs() < 1e-6);
        assert!(r.max_abs_moment < 1e-8);
        assert!(r.holds(1e-6, 1e-8));
    }

    #[test]
    fn gaussian_fails_order_four() {
        let r = verify_regularity(KdeKernel::Gaussian, 1, 4, 4096).unwrap();
        let second = r.moments.iter().find(|(a, _)| a == &vec![2]).unwrap().1;
        assert!((second - 1.0).abs() < 1e-6);
        assert!(!r.holds(1e-6, 1e-8));
    }

    #[test]
    fn uniform_kernel_exact() {
        let r = verify_regularity(KdeKernel::Uniform, 1, 2, 4096).unwrap();
        assert!((r.integral - 1.0).abs() < 1e-12);
        assert!(r.max_abs_moment < 1e-12);
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(2, 2).len(), 5);
        assert_eq!(multi_indices(1, 3), vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn identical_laws_have_zero_lhs() {
        let c = smoothed_tv_bound_check(&[0.0, 1.0], &[1.0, 0.0], KdeKernel::Gaussian, 0.5, 4096).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(smoothed_tv_bound_check(&[0.0], &[1.0], KdeKernel::Gaussian, 0.0, 10).is_err());
    }
}
