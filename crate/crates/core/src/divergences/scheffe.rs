use crate::autodiff::Tensor;
use crate::data::seeds::{self, derive_seed, Rng};
use crate::data::GaussianMixture;
use crate::error::{Error, Result};

/// Default Monte-Carlo draws per candidate.
pub const SCHEFFE_DRAWS: usize = 10_000;

/// A candidate density that can be evaluated and sampled.
pub trait DensityCandidate: Sync {
    fn density(&self, x: &[f64]) -> f64;
    fn sample(&self, n: usize, rng: &mut Rng) -> Tensor;
}

impl DensityCandidate for GaussianMixture {
    fn density(&self, x: &[f64]) -> f64 {
        GaussianMixture::density(self, x)
    }

    fn sample(&self, n: usize, rng: &mut Rng) -> Tensor {
        self.draw(n, rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheffeOutcome {
    pub winner: usize,
    /// `max_{i≠j} |∫_{A_ij} p_k - P̂_n(A_ij)|` per candidate.
    pub discrepancies: Vec<f64>,
}

/// Minimum-distance selection over the Scheffé sets `A_ij = {p_i >= p_j}`.
///
/// Candidate integrals over `A_ij` are Monte-Carlo fractions of `draws`
/// samples from that candidate. Ties go to the lowest index.
pub fn scheffe_select(
    candidates: &[&dyn DensityCandidate],
    samples: &Tensor,
    draws: usize,
    seed: u64,
) -> Result<ScheffeOutcome> {
    let k = candidates.len();
    if k == 0 {
        return Err(Error::invalid("scheffe tournament needs at least one candidate"));
    }
    if samples.rows() == 0 || draws == 0 {
        return Err(Error::invalid("scheffe tournament needs samples and draws"));
    }
    // density table: rows are points, columns candidates
    let table = |pts: &Tensor| -> Vec<f64> {
        pts.row_iter().flat_map(|p| candidates.iter().map(move |c| c.density(p))).collect()
    };
    let fractions = |dens: &[f64], rows: usize| -> Vec<f64> {
        let mut frac = vec![0.0; k * k];
        for r in 0..rows {
            let d = &dens[r * k..(r + 1) * k];
            for i in 0..k {
                for j in 0..k {
                    if i != j && d[i] >= d[j] {
                        frac[i * k + j] += 1.0;
                    }
                }
            }
        }
        frac.iter_mut().for_each(|f| *f /= rows as f64);
        frac
    };
    let empirical = fractions(&table(samples), samples.rows());

    let mut discrepancies = Vec::with_capacity(k);
    for (c, cand) in candidates.iter().enumerate() {
        let mut rng = seeds::rng(derive_seed(seed, "scheffe", &[c as u64]));
        let pts = cand.sample(draws, &mut rng);
        let model = fractions(&table(&pts), draws);
        let worst = (0..k * k)
            .filter(|&ij| ij / k != ij % k)
            .map(|ij| (model[ij] - empirical[ij]).abs())
            .fold(0.0, f64::max);
        discrepancies.push(worst);
    }
    let mut winner = 0;
    for (c, &d) in discrepancies.iter().enumerate() {
        if d < discrepancies[winner] {
            winner = c;
        }
    }
    Ok(ScheffeOutcome { winner, discrepancies })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(mean: f64) -> GaussianMixture {
        GaussianMixture {
            components: vec![(1.0, vec![mean], 1.0)],
        }
    }

    #[test]
    fn identical_candidates_pick_first() {
        let a = normal(0.0);
        let b = normal(0.0);
        let x = Tensor::matrix(3, 1, vec![0.0, 1.0, -1.0]);
        let out = scheffe_select(&[&a, &b], &x, 100, 1).unwrap();
        assert_eq!(out.winner, 0);
    }

    #[test]
    fn separated_means() {
        let (a, b) = (normal(5.0), normal(0.0));
        let mut rng = seeds::rng(4);
        let x = b.draw(500, &mut rng);
        let out = scheffe_select(&[&a, &b], &x, 2000, 1).unwrap();
        assert_eq!(out.winner, 1);
    }
}
