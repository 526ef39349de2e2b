use rand::Rng as _;
use rand_distr::{Beta, Distribution, Exp, StandardNormal};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::dataset::Dataset;
use super::seeds::{self, Rng};

/// Component means of the Five-Gaussian law: five of the eight vertices of
/// the unit cube.
pub const FIVE_GAUSSIAN_VERTICES: [[f64; 3]; 5] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 1.0],
];

/// Size of the full Five-Gaussian collection.
pub const FIVE_GAUSSIAN_FULL_N: usize = 50_000;

/// Equal-weight mixture of five `N(vertex, I_3)` components.
///
/// Row `i`'s component is recorded in `labels`.
pub fn sample_five_gaussian(n: usize, seed: u64) -> Result<Dataset> {
    if n < 5 {
        return Err(Error::invalid(format!("five-gaussian sampler needs n >= 5, got {}", n)));
    }
    let mut rng = seeds::rng(seed);
    let mut data = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..5usize);
        labels.push(c as u32);
        for v in FIVE_GAUSSIAN_VERTICES[c] {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(v + z);
        }
    }
    Dataset::new(Tensor::matrix(n, 3, data), "five_gaussian", Some(seed))?.with_labels(labels)
}

/// Latent target law `ρ`.
///
/// Beta and exponential variants have independent marginals.
#[derive(Clone, Debug, PartialEq)]
pub enum LatentLawSpec {
    Gaussian { k: usize },
    BetaMarginals { a: f64, b: f64, k: usize },
    ExpMarginals { rate: f64, k: usize },
}

impl LatentLawSpec {
    pub fn gaussian(k: usize) -> Self {
        LatentLawSpec::Gaussian { k }
    }

    /// `Beta(0.5, 0.8)` marginals.
    pub fn beta_default(k: usize) -> Self {
        LatentLawSpec::BetaMarginals { a: 0.5, b: 0.8, k }
    }

    pub fn exp_default(k: usize) -> Self {
        LatentLawSpec::ExpMarginals { rate: 1.0, k }
    }

    pub fn dim(&self) -> usize {
        match *self {
            LatentLawSpec::Gaussian { k }
            | LatentLawSpec::BetaMarginals { k, .. }
            | LatentLawSpec::ExpMarginals { k, .. } => k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::invalid("latent dimension must be >= 1"));
        }
        match *self {
            LatentLawSpec::BetaMarginals { a, b, .. } if !(a > 0.0 && b > 0.0) => {
                Err(Error::invalid(format!("beta parameters must be positive, got ({}, {})", a, b)))
            }
            LatentLawSpec::ExpMarginals { rate, .. } if !(rate > 0.0) => {
                Err(Error::invalid(format!("exponential rate must be positive, got {}", rate)))
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            LatentLawSpec::Gaussian { k } => format!("gaussian({})", k),
            LatentLawSpec::BetaMarginals { a, b, k } => format!("beta({},{};{})", a, b, k),
            LatentLawSpec::ExpMarginals { rate, k } => format!("exp({};{})", rate, k),
        }
    }

    /// Draws an `n x k` matrix from an existing stream.
    pub fn draw(&self, n: usize, rng: &mut Rng) -> Result<Tensor> {
        self.validate()?;
        let k = self.dim();
        let mut data = Vec::with_capacity(n * k);
        match *self {
            LatentLawSpec::Gaussian { .. } => {
                for _ in 0..n * k {
                    data.push(StandardNormal.sample(rng));
                }
            }
            LatentLawSpec::BetaMarginals { a, b, .. } => {
                let d = Beta::new(a, b).map_err(|e| Error::invalid(e.to_string()))?;
                for _ in 0..n * k {
                    data.push(d.sample(rng));
                }
            }
            LatentLawSpec::ExpMarginals { rate, .. } => {
                let d = Exp::new(rate).map_err(|e| Error::invalid(e.to_string()))?;
                for _ in 0..n * k {
                    data.push(d.sample(rng));
                }
            }
        }
        Ok(Tensor::matrix(n, k, data))
    }
}

pub fn sample_latent(spec: &LatentLawSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("latent sampler needs n >= 1"));
    }
    let mut rng = seeds::rng(seed);
    let m = spec.draw(n, &mut rng)?;
    Dataset::new(m, format!("latent:{}", spec.tag()), Some(seed))
}

/// Mixture of isotropic Gaussians with analytic density; the clean law of
/// the robust-KDE experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    /// `(weight, mean, sd)` per component; weights sum to one.
    pub components: Vec<(f64, Vec<f64>, f64)>,
}

impl GaussianMixture {
    pub fn standard(d: usize) -> Self {
        GaussianMixture {
            components: vec![(1.0, vec![0.0; d], 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.components.is_empty() || d == 0 {
            return Err(Error::invalid("mixture needs at least one component of dimension >= 1"));
        }
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {}", total)));
        }
        for (w, mean, sd) in &self.components {
            if mean.len() != d || !(*sd > 0.0) || *w < 0.0 {
                return Err(Error::invalid("mixture component has wrong dimension, weight or sd"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.components.first().map(|c| c.1.len()).unwrap_or(0)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        self.components
            .iter()
            .map(|(w, mean, sd)| {
                let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                w * (-r2 / (2.0 * sd * sd)).exp() / (2.0 * std::f64::consts::PI * sd * sd).powf(d / 2.0)
            })
            .sum()
    }

    pub fn draw(&self, n: usize, rng: &mut Rng) -> Tensor {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (k, c) in self.components.iter().enumerate() {
                acc += c.0;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            let (_, mean, sd) = &self.components[pick];
            for m in mean {
                let z: f64 = StandardNormal.sample(rng);
                data.push(m + sd * z);
            }
        }
        Tensor::matrix(n, d, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_gaussian_is_deterministic() {
        let a = sample_five_gaussian(200, 11).unwrap();
        let b = sample_five_gaussian(200, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_five_gaussian(200, 12).unwrap());
        assert!(sample_five_gaussian(4, 1).is_err());
    }

    #[test]
    fn beta_support() {
        let ds = sample_latent(&LatentLawSpec::beta_default(2), 5000, 3).unwrap();
        assert!(ds.matrix().data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn exponential_means() {
        let n = 20_000;
        let ds = sample_latent(&LatentLawSpec::exp_default(2), n, 5).unwrap();
        for j in 0..2 {
            let mean: f64 = (0..n).map(|i| ds.row(i)[j]).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt(), "{}", mean);
        }
    }

    #[test]
    fn gaussian_covariance_near_identity() {
        let n = 10_000;
        let ds = sample_latent(&LatentLawSpec::gaussian(2), n, 9).unwrap();
        let mut cov = [[0.0; 2]; 2];
        let mean: Vec<f64> = (0..2).map(|j| (0..n).map(|i| ds.row(i)[j]).sum::<f64>() / n as f64).collect();
        for i in 0..n {
            let r = ds.row(i);
            for a in 0..2 {
                for b in 0..2 {
                    cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / (n as f64 - 1.0);
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((cov[a][b] - target).abs() < 0.1);
            }
        }
    }

    #[test]
    fn invalid_latent_parameters() {
        assert!(LatentLawSpec::BetaMarginals { a: 0.0, b: 1.0, k: 2 }.validate().is_err());
        assert!(LatentLawSpec::ExpMarginals { rate: -1.0, k: 2 }.validate().is_err());
        assert!(LatentLawSpec::Gaussian { k: 0 }.validate().is_err());
    }

    #[test]
    fn mixture_density_at_center() {
        let m = GaussianMixture::standard(1);
        let p0 = m.density(&[0.0]);
        assert!((p0 - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }
}
