use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Tensor;
use crate::data::seeds;
use crate::error::{Error, Result};

use super::group::FiniteGroup;
use super::kernel::KernelSpec;

/// Expands every row over its orbit: row `i * |Σ| + g` is `σ_g z_i`.
pub fn symmetrize(samples: &Tensor, group: &FiniteGroup) -> Result<Tensor> {
    let k = group.dim();
    if samples.shape().len() != 2 || samples.cols() != k {
        return Err(Error::shape("symmetrize", k, format!("{:?}", samples.shape())));
    }
    let order = group.order();
    let mut out = Tensor::zeros(&[samples.rows() * order, k]);
    for i in 0..samples.rows() {
        for g in 0..order {
            group.act(g, samples.row(i), out.row_mut(i * order + g));
        }
    }
    Ok(out)
}

/// Orbit representative maximizing `⟨c, σz⟩` with
/// `c = (cos(π/|Σ|), sin(π/|Σ|), 0, ...)`. For planar rotations by `2π/m`
/// this is the sector of angles in `[0, 2π/m)`.
pub fn canonicalize(z: &[f64], group: &FiniteGroup) -> Vec<f64> {
    let k = group.dim();
    let theta = std::f64::consts::PI / group.order() as f64;
    let mut c = vec![0.0; k];
    c[0] = theta.cos();
    if k > 1 {
        c[1] = theta.sin();
    }
    let mut best = z.to_vec();
    let mut best_score = f64::NEG_INFINITY;
    let mut buf = vec![0.0; k];
    for g in 0..group.order() {
        group.act(g, z, &mut buf);
        let score: f64 = buf.iter().zip(&c).map(|(a, b)| a * b).sum();
        if score > best_score {
            best_score = score;
            best.copy_from_slice(&buf);
        }
    }
    best
}

/// `max_{z, σ ≠ id} κ(σz, z) / C_κ` over the given probes, clamped to
/// `[0, 1]`; zero for the trivial group.
pub fn varsigma_on_probes(kernel: &KernelSpec, group: &FiniteGroup, probes: &Tensor) -> Result<f64> {
    let c = kernel.bound();
    if !c.is_finite() {
        return Err(Error::invalid("varsigma needs a bounded kernel"));
    }
    if probes.cols() != group.dim() {
        return Err(Error::shape("varsigma", group.dim(), probes.cols()));
    }
    let mut best = 0.0f64;
    let mut buf = vec![0.0; group.dim()];
    for z in probes.row_iter() {
        for g in 0..group.order() {
            if group.is_identity(g) {
                continue;
            }
            group.act(g, z, &mut buf);
            best = best.max(kernel.eval(&buf, z) / c);
        }
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Estimates `ς_{κ,Σ}` from `n_probe` standard Gaussian draws mapped to the
/// canonical fundamental-domain proxy.
pub fn estimate_varsigma(kernel: &KernelSpec, group: &FiniteGroup, n_probe: usize, seed: u64) -> Result<f64> {
    if !kernel.bound().is_finite() {
        return Err(Error::invalid("varsigma needs a bounded kernel"));
    }
    let k = group.dim();
    let mut rng = seeds::rng(seed);
    let mut probes = Tensor::zeros(&[n_probe, k]);
    for i in 0..n_probe {
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        probes.row_mut(i).copy_from_slice(&canonicalize(&z, group));
    }
    varsigma_on_probes(kernel, group, &probes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_group_keeps_samples() {
        let x = Tensor::matrix(2, 2, vec![1.0, 2.0, -3.0, 0.5]);
        assert_eq!(symmetrize(&x, &FiniteGroup::trivial(2)).unwrap(), x);
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(estimate_varsigma(&k, &FiniteGroup::trivial(2), 10, 0).unwrap(), 0.0);
    }

    #[test]
    fn sign_flip_orbit() {
        let x = Tensor::matrix(1, 2, vec![1.0, 2.0]);
        let s = symmetrize(&x, &FiniteGroup::sign_flip(2)).unwrap();
        assert_eq!(s.data(), &[1.0, 2.0, -1.0, -2.0]);
    }

    #[test]
    fn c4_orbit_of_unit_vector() {
        let x = Tensor::matrix(1, 2, vec![1.0, 0.0]);
        let s = symmetrize(&x, &FiniteGroup::cyclic(4).unwrap()).unwrap();
        assert_eq!(s.data(), &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn canonical_sector_for_c4() {
        let g = FiniteGroup::cyclic(4).unwrap();
        let z = canonicalize(&[-0.3, -2.0], &g);
        let angle = z[1].atan2(z[0]);
        assert!((0.0..std::f64::consts::FRAC_PI_2).contains(&angle), "{}", angle);
    }

    #[test]
    fn energy_kernel_rejected() {
        let k = KernelSpec::energy(0.5).unwrap();
        assert!(estimate_varsigma(&k, &FiniteGroup::sign_flip(2), 10, 0).is_err());
    }
}
