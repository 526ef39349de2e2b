use rand_distr::{Distribution, StandardNormal};

use crate::data::seeds;
use crate::error::{Error, Result};

use super::group::FiniteGroup;

/// Positive-definite kernel on `ℝ^k`.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    /// `exp(-‖u - v‖² / (2σ²))`.
    Gaussian { bandwidth: f64 },
    /// Per-axis bandwidths; not rotation invariant.
    AnisotropicGaussian { bandwidths: Vec<f64> },
    /// `‖u‖^{2α} + ‖v‖^{2α} - ‖u - v‖^{2α}`.
    Energy { alpha: f64 },
    /// A base kernel that is invariant under a group; evaluates the base.
    GroupInvariant { base: Box<KernelSpec>, group: FiniteGroup },
}

fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn sq_norm(u: &[f64]) -> f64 {
    u.iter().map(|a| a * a).sum()
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!("gaussian bandwidth must be positive, got {}", bandwidth)));
        }
        Ok(KernelSpec::Gaussian { bandwidth })
    }

    pub fn anisotropic(bandwidths: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() || bandwidths.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid("anisotropic bandwidths must be positive"));
        }
        Ok(KernelSpec::AnisotropicGaussian { bandwidths })
    }

    pub fn energy(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("energy exponent must lie in (0, 1), got {}", alpha)));
        }
        Ok(KernelSpec::Energy { alpha })
    }

    /// Wraps a bounded base kernel, checking `κ(σz, σz′) = κ(z, z′)` on
    /// random probes.
    pub fn group_invariant(base: KernelSpec, group: FiniteGroup) -> Result<Self> {
        if !base.bound().is_finite() {
            return Err(Error::invalid("group-invariant kernels need a bounded base kernel"));
        }
        let k = group.dim();
        if let KernelSpec::AnisotropicGaussian { bandwidths } = &base {
            if bandwidths.len() != k {
                return Err(Error::shape("group_invariant", k, bandwidths.len()));
            }
        }
        let dev = invariance_defect(&base, &group, 256, 0x5eed)?;
        if dev >= 1e-10 {
            return Err(Error::invalid(format!(
                "base kernel is not invariant under {} (defect {:e})",
                group.name(),
                dev
            )));
        }
        Ok(KernelSpec::GroupInvariant {
            base: Box::new(base),
            group,
        })
    }

    /// `C_κ = sup_z κ(z, z)`; infinite for energy kernels.
    pub fn bound(&self) -> f64 {
        match self {
            KernelSpec::Gaussian { .. } | KernelSpec::AnisotropicGaussian { .. } => 1.0,
            KernelSpec::Energy { .. } => f64::INFINITY,
            KernelSpec::GroupInvariant { base, .. } => base.bound(),
        }
    }

    /// Kernels that depend on `u, v` only through rotation-invariant
    /// quantities.
    pub fn is_radial(&self) -> bool {
        match self {
            KernelSpec::Gaussian { .. } | KernelSpec::Energy { .. } => true,
            KernelSpec::AnisotropicGaussian { .. } => false,
            KernelSpec::GroupInvariant { base, .. } => base.is_radial(),
        }
    }

    /// Kernel with any group wrapper removed.
    pub fn base(&self) -> &KernelSpec {
        match self {
            KernelSpec::GroupInvariant { base, .. } => base.base(),
            other => other,
        }
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            KernelSpec::Gaussian { bandwidth } => (-sq_dist(u, v) / (2.0 * bandwidth * bandwidth)).exp(),
            KernelSpec::AnisotropicGaussian { bandwidths } => {
                let s: f64 = u
                    .iter()
                    .zip(v)
                    .zip(bandwidths)
                    .map(|((a, b), h)| (a - b) * (a - b) / (h * h))
                    .sum();
                (-0.5 * s).exp()
            }
            KernelSpec::Energy { alpha } => {
                sq_norm(u).powf(*alpha) + sq_norm(v).powf(*alpha) - sq_dist(u, v).powf(*alpha)
            }
            KernelSpec::GroupInvariant { base, .. } => base.eval(u, v),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            KernelSpec::Gaussian { bandwidth } => format!("gaussian({})", bandwidth),
            KernelSpec::AnisotropicGaussian { bandwidths } => {
                let b: Vec<String> = bandwidths.iter().map(|v| v.to_string()).collect();
                format!("anisotropic({})", b.join(";"))
            }
            KernelSpec::Energy { alpha } => format!("energy({})", alpha),
            KernelSpec::GroupInvariant { base, group } => format!("{}@{}", base.tag(), group.name()),
        }
    }
}

/// `max |κ(σz, σz′) - κ(z, z′)|` over random Gaussian probes.
pub fn invariance_defect(kernel: &KernelSpec, group: &FiniteGroup, probes: usize, seed: u64) -> Result<f64> {
    let k = group.dim();
    let mut rng = seeds::rng(seed);
    let mut draw = || -> Vec<f64> {
        (0..k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                2.0 * z
            })
            .collect()
    };
    let (mut sz, mut sw) = (vec![0.0; k], vec![0.0; k]);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let (z, w) = (draw(), draw());
        let base = kernel.eval(&z, &w);
        for idx in 0..group.order() {
            group.act(idx, &z, &mut sz);
            group.act(idx, &w, &mut sw);
            worst = worst.max((kernel.eval(&sz, &sw) - base).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_diagonal_is_one() {
        let k = KernelSpec::gaussian(0.7).unwrap();
        assert_eq!(k.eval(&[1.5, -2.0], &[1.5, -2.0]), 1.0);
    }

    #[test]
    fn energy_values() {
        let k = KernelSpec::energy(0.5).unwrap();
        assert_eq!(k.eval(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        let v = k.eval(&[1.0, 0.0], &[0.0, 1.0]);
        assert!((v - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        assert!(KernelSpec::energy(1.0).is_err());
    }

    #[test]
    fn group_wrapper_requirements() {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        assert!(KernelSpec::group_invariant(KernelSpec::energy(0.5).unwrap(), c4.clone()).is_err());
        let aniso = KernelSpec::anisotropic(vec![1.0, 3.0]).unwrap();
        assert!(KernelSpec::group_invariant(aniso, c4.clone()).is_err());
        let ok = KernelSpec::group_invariant(KernelSpec::gaussian(1.0).unwrap(), c4).unwrap();
        assert_eq!(ok.bound(), 1.0);
    }
}
