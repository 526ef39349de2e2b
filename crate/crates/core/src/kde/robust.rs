use std::io::Write;

use rayon::prelude::*;

use crate::data::seeds::{self, derive_seed};
use crate::data::{contaminate, wasserstein_epsilon, ContaminationLaw, ContaminationSpec, Dataset, EpsilonEstimate, GaussianMixture};
use crate::error::{Error, Result};
use crate::stats::{loglog_fit, LogLogFit};

use super::estimate::{KdeEstimate, KdeKernel};

/// Bandwidth as a function of the sample size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandwidthPolicy {
    /// `h = n^{-ξ}`.
    Power { xi: f64 },
    /// `h = n^{-1/(d + 2m)} ∨ ε^{1/(2d + m)}`.
    Robust { m: usize, d: usize, eps: f64 },
}

impl BandwidthPolicy {
    pub fn bandwidth(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            BandwidthPolicy::Power { xi } => n.powf(-xi),
            BandwidthPolicy::Robust { m, d, eps } => {
                let clean = n.powf(-1.0 / (d + 2 * m) as f64);
                let contaminated = if eps > 0.0 { eps.powf(1.0 / (2 * d + m) as f64) } else { 0.0 };
                clean.max(contaminated)
            }
        }
    }
}

/// Robust-KDE rate experiment: error of `p̂_h(0)` against the clean
/// density at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustKdeConfig {
    pub clean: GaussianMixture,
    /// Declared smoothness order `m_x` of the clean density.
    pub smoothness: usize,
    /// Contaminating law; `None` for clean data.
    pub law: Option<ContaminationLaw>,
    pub fraction: f64,
    pub level: f64,
    /// Declared contamination radius entering the bandwidth rule.
    pub epsilon: f64,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Pairs for the Monte-Carlo estimate of `E‖X - Y‖`; 0 skips it.
    pub epsilon_pairs: usize,
}

impl RobustKdeConfig {
    pub fn clean_1d(n_grid: Vec<usize>, reps: usize, seed: u64) -> Self {
        RobustKdeConfig {
            clean: GaussianMixture::standard(1),
            smoothness: 2,
            law: None,
            fraction: 0.0,
            level: 0.0,
            epsilon: 0.0,
            n_grid,
            reps,
            seed,
            epsilon_pairs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.clean.validate()?;
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return Err(Error::invalid("n grid must be non-empty, positive and strictly increasing"));
        }
        if self.reps == 0 || self.smoothness == 0 {
            return Err(Error::invalid("robust kde needs reps >= 1 and smoothness >= 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("declared epsilon must be nonnegative"));
        }
        Ok(())
    }

    pub fn policy(&self) -> BandwidthPolicy {
        BandwidthPolicy::Robust {
            m: self.smoothness,
            d: self.clean.dim(),
            eps: self.epsilon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub epsilon: f64,
    pub rep: usize,
    pub h: f64,
    pub abs_error: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// `(n, mean abs error)` per grid point.
    pub means: Vec<(usize, f64)>,
    pub fit_all: LogLogFit,
    /// Fit over the upper half of the grid (at least two points).
    pub fit_top_half: LogLogFit,
    pub epsilon_hat: Option<EpsilonEstimate>,
}

impl RateTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["n", "epsilon", "rep", "h", "abs_error", "seed"])?;
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                r.epsilon.to_string(),
                r.rep.to_string(),
                r.h.to_string(),
                r.abs_error.to_string(),
                r.seed.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn one_rep(config: &RobustKdeConfig, n: usize, rep: usize) -> Result<RateRow> {
    let seed = derive_seed(config.seed, "robust_kde", &[n as u64, rep as u64]);
    let mut rng = seeds::rng(seed);
    let clean = Dataset::new(config.clean.draw(n, &mut rng), "mixture", Some(seed))?;
    let data = match &config.law {
        Some(law) => contaminate(
            &clean,
            &ContaminationSpec {
                fraction: config.fraction,
                level: config.level,
                law: law.clone(),
                seed: derive_seed(seed, "contaminate", &[]),
            },
        )?,
        None => clean,
    };
    let h = config.policy().bandwidth(n);
    let est = KdeEstimate::new(data.into_matrix(), KdeKernel::Gaussian, h)?;
    let origin = vec![0.0; config.clean.dim()];
    let abs_error = (est.eval(&origin)? - config.clean.density(&origin)).abs();
    Ok(RateRow {
        n,
        epsilon: config.epsilon,
        rep,
        h,
        abs_error,
        seed,
    })
}

pub fn robust_kde_experiment(config: &RobustKdeConfig) -> Result<RateTable> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.reps).map(move |r| (n, r)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, rep)| one_rep(config, n, rep))
        .collect::<Result<Vec<_>>>()?;

    let means: Vec<(usize, f64)> = config
        .n_grid
        .iter()
        .map(|&n| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.abs_error).collect();
            (n, errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect();
    let xs: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.1).collect();
    let fit_all = loglog_fit(&xs, &ys)?;
    let half = (xs.len() / 2).min(xs.len().saturating_sub(2));
    let fit_top_half = loglog_fit(&xs[half..], &ys[half..])?;

    let epsilon_hat = match (&config.law, config.epsilon_pairs) {
        (Some(law), pairs) if pairs > 0 => {
            let n = *config.n_grid.last().unwrap();
            let seed = derive_seed(config.seed, "epsilon_hat", &[]);
            let mut rng = seeds::rng(seed);
            let clean = Dataset::new(config.clean.draw(n, &mut rng), "mixture", Some(seed))?;
            let other = Dataset::new(config.clean.draw(n, &mut rng), "mixture", Some(seed))?;
            let dirty = contaminate(
                &other,
                &ContaminationSpec {
                    fraction: config.fraction,
                    level: config.level,
                    law: law.clone(),
                    seed,
                },
            )?;
            Some(wasserstein_epsilon(&clean, &dirty, pairs, seed)?)
        }
        _ => None,
    };

    Ok(RateTable {
        rows,
        means,
        fit_all,
        fit_top_half,
        epsilon_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robust_bandwidth_rule() {
        let p = BandwidthPolicy::Robust { m: 2, d: 1, eps: 0.0 };
        assert!((p.bandwidth(32) - 0.5).abs() < 1e-12);
        let p = BandwidthPolicy::Robust { m: 2, d: 1, eps: 0.0625 };
        // ε^{1/4} = 0.5 dominates n^{-1/5} for n > 32
        assert!((p.bandwidth(1000) - 0.5).abs() < 1e-12);
        assert!((BandwidthPolicy::Power { xi: 1.0 }.bandwidth(4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rows_are_deterministic() {
        let cfg = RobustKdeConfig::clean_1d(vec![50, 100, 200], 3, 5);
        let a = robust_kde_experiment(&cfg).unwrap();
        let b = robust_kde_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 9);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,epsilon,rep,h,abs_error,seed\n"));
    }
}
