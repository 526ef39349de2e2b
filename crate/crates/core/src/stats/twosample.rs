use std::cmp::Ordering;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::autodiff::Tensor;
use crate::data::seeds::{self, derive_seed};
use crate::error::{Error, Result};

pub const DEFAULT_PERMUTATIONS: usize = 1000;
pub const DEFAULT_EIGEN_DRAWS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    /// `"ff"` or `"cramer"`.
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    /// `"permutation"`, `"monte_carlo"` or `"eigenvalue"`.
    pub method: String,
    pub replications: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    /// Eigenvalue method only: mass of negative eigenvalues set to zero.
    pub clipped_eigen_mass: Option<f64>,
}

impl TestResult {
    pub const CSV_HEADER: [&'static str; 7] = ["test", "stat", "p", "method", "n", "m", "seed"];

    pub fn csv_record(&self) -> [String; 7] {
        [
            self.test.clone(),
            self.statistic.to_string(),
            self.p_value.to_string(),
            self.method.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.seed.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(results: &[TestResult], w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::CSV_HEADER)?;
        for r in results {
            wtr.write_record(r.csv_record())?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CramerMethod {
    MonteCarlo,
    Eigenvalue,
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Rows of `x` then rows of `y`, each block sorted lexicographically so the
/// tests do not depend on input row order.
fn pooled(x: &Tensor, y: &Tensor, min_rows: usize, op: &'static str) -> Result<Vec<Vec<f64>>> {
    if x.shape().len() != 2 || y.shape().len() != 2 || x.cols() != y.cols() {
        return Err(Error::shape(op, format!("{:?}", x.shape()), format!("{:?}", y.shape())));
    }
    if x.rows() < min_rows || y.rows() < min_rows {
        return Err(Error::invalid(format!("{} needs at least {} rows per sample", op, min_rows)));
    }
    let mut xs: Vec<Vec<f64>> = x.row_iter().map(|r| r.to_vec()).collect();
    let mut ys: Vec<Vec<f64>> = y.row_iter().map(|r| r.to_vec()).collect();
    xs.sort_by(|a, b| lex(a, b));
    ys.sort_by(|a, b| lex(a, b));
    xs.extend(ys);
    Ok(xs)
}

fn ff_statistic(codes: &[u8], big_n: usize, orthants: usize, is_x: &[bool], n: usize, m: usize) -> f64 {
    let (mut dx, mut dy) = (0.0f64, 0.0f64);
    let mut cx = vec![0usize; orthants];
    let mut cy = vec![0usize; orthants];
    for a in 0..big_n {
        cx.iter_mut().for_each(|c| *c = 0);
        cy.iter_mut().for_each(|c| *c = 0);
        let row = &codes[a * big_n..(a + 1) * big_n];
        for (b, &code) in row.iter().enumerate() {
            if is_x[b] {
                cx[code as usize] += 1;
            } else {
                cy[code as usize] += 1;
            }
        }
        let mut worst = 0.0f64;
        for o in 0..orthants {
            worst = worst.max((cx[o] as f64 / n as f64 - cy[o] as f64 / m as f64).abs());
        }
        if is_x[a] {
            dx = dx.max(worst);
        } else {
            dy = dy.max(worst);
        }
    }
    0.5 * (dx + dy)
}

/// Fasano-Franceschini test: origins taken from both samples, statistic
/// `(D_X + D_Y) / 2`, p-value `(1 + #{D* >= D}) / (n_perm + 1)` over random
/// relabelings of the pooled sample.
pub fn ff_test(x: &Tensor, y: &Tensor, n_perm: usize, seed: u64) -> Result<TestResult> {
    let d = x.cols();
    if d != 2 && d != 3 {
        return Err(Error::invalid(format!("fasano-franceschini test supports d in {{2, 3}}, got {}", d)));
    }
    let z = pooled(x, y, 5, "ff_test")?;
    let (n, m) = (x.rows(), y.rows());
    let big_n = n + m;
    let orthants = 1usize << d;
    let mut codes = vec![0u8; big_n * big_n];
    for a in 0..big_n {
        for b in 0..big_n {
            let mut code = 0u8;
            for c in 0..d {
                if z[b][c] > z[a][c] {
                    code |= 1 << c;
                }
            }
            codes[a * big_n + b] = code;
        }
    }
    let labels: Vec<bool> = (0..big_n).map(|i| i < n).collect();
    let stat = ff_statistic(&codes, big_n, orthants, &labels, n, m);
    let exceed: usize = (0..n_perm)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeds::rng(derive_seed(seed, "ff_perm", &[r as u64]));
            let mut perm = labels.clone();
            perm.shuffle(&mut rng);
            let s = ff_statistic(&codes, big_n, orthants, &perm, n, m);
            usize::from(s >= stat - 1e-12)
        })
        .sum();
    Ok(TestResult {
        test: "ff".into(),
        statistic: stat,
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
        method: "permutation".into(),
        replications: n_perm,
        seed,
        n,
        m,
        clipped_eigen_mass: None,
    })
}

/// `T = (nm/N) vᵀ(-D)v` with `D_ij = ‖z_i - z_j‖ / 2` and `v` equal to
/// `1/n` on the first sample and `-1/m` on the second.
fn cramer_statistic(dist: &[f64], big_n: usize, is_x: &[bool], n: usize, m: usize) -> f64 {
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..big_n {
        let row = &dist[i * big_n..(i + 1) * big_n];
        let (mut rx, mut ry) = (0.0, 0.0);
        for (j, &v) in row.iter().enumerate() {
            if is_x[j] {
                rx += v;
            } else {
                ry += v;
            }
        }
        if is_x[i] {
            sxx += rx;
            sxy += ry;
        } else {
            syy += ry;
        }
    }
    let (nf, mf) = (n as f64, m as f64);
    let energy = 2.0 * sxy / (nf * mf) - sxx / (nf * nf) - syy / (mf * mf);
    nf * mf / (nf + mf) * energy
}

/// Cramér test with kernel `φ(z) = √z / 2` on squared distances.
pub fn cramer_test(x: &Tensor, y: &Tensor, method: CramerMethod, n_rep: usize, seed: u64) -> Result<TestResult> {
    let z = pooled(x, y, 5, "cramer_test")?;
    let (n, m) = (x.rows(), y.rows());
    let big_n = n + m;
    let mut dist = vec![0.0; big_n * big_n];
    for i in 0..big_n {
        for j in i + 1..big_n {
            let d2: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = 0.5 * d2.sqrt();
            dist[i * big_n + j] = v;
            dist[j * big_n + i] = v;
        }
    }
    if dist.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("cramer test on degenerate data: all pooled points coincide"));
    }
    let labels: Vec<bool> = (0..big_n).map(|i| i < n).collect();
    let stat = cramer_statistic(&dist, big_n, &labels, n, m);

    let (p_value, method_tag, clipped) = match method {
        CramerMethod::MonteCarlo => {
            let exceed: usize = (0..n_rep)
                .into_par_iter()
                .map(|r| {
                    let mut rng = seeds::rng(derive_seed(seed, "cramer_perm", &[r as u64]));
                    let mut perm = labels.clone();
                    perm.shuffle(&mut rng);
                    usize::from(cramer_statistic(&dist, big_n, &perm, n, m) >= stat - 1e-12)
                })
                .sum();
            ((1 + exceed) as f64 / (n_rep + 1) as f64, "monte_carlo", None)
        }
        CramerMethod::Eigenvalue => {
            // eigenvalues of the doubly centred matrix -HDH, scaled by 1/N
            let mut a = DMatrix::from_row_slice(big_n, big_n, &dist);
            let row_means: Vec<f64> = (0..big_n).map(|i| a.row(i).sum() / big_n as f64).collect();
            let grand = row_means.iter().sum::<f64>() / big_n as f64;
            for i in 0..big_n {
                for j in 0..big_n {
                    a[(i, j)] = -(a[(i, j)] - row_means[i] - row_means[j] + grand);
                }
            }
            let eig = SymmetricEigen::new(a).eigenvalues;
            let scaled: Vec<f64> = eig.iter().map(|l| l / big_n as f64).collect();
            let clipped: f64 = scaled.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
            let top = scaled.iter().fold(0.0f64, |s, l| s.max(*l));
            let lambdas: Vec<f64> = scaled.into_iter().filter(|&l| l > 1e-12 * top).collect();
            let chunks = 16usize;
            let per = n_rep.div_ceil(chunks);
            let exceed: usize = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = seeds::rng(derive_seed(seed, "cramer_eigen", &[c as u64]));
                    let todo = per.min(n_rep.saturating_sub(c * per));
                    (0..todo)
                        .filter(|_| {
                            let s: f64 = lambdas
                                .iter()
                                .map(|l| {
                                    let g: f64 = StandardNormal.sample(&mut rng);
                                    l * g * g
                                })
                                .sum();
                            s >= stat
                        })
                        .count()
                })
                .sum();
            (exceed as f64 / n_rep.max(1) as f64, "eigenvalue", Some(clipped))
        }
    };
    Ok(TestResult {
        test: "cramer".into(),
        statistic: stat,
        p_value: p_value.clamp(0.0, 1.0),
        method: method_tag.into(),
        replications: n_rep,
        seed,
        n,
        m,
        clipped_eigen_mass: clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, shift: f64) -> Tensor {
        Tensor::matrix(n, 2, (0..2 * n).map(|i| ((i * 7919) % 13) as f64 / 13.0 + shift).collect())
    }

    #[test]
    fn identical_samples() {
        let x = grid(12, 0.0);
        let r = ff_test(&x, &x, 99, 1).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value >= 0.5);
        let c = cramer_test(&x, &x, CramerMethod::MonteCarlo, 99, 1).unwrap();
        assert_eq!(c.statistic, 0.0);
    }

    #[test]
    fn dimension_checks() {
        let x = Tensor::zeros(&[6, 4]);
        assert!(ff_test(&x, &x, 10, 0).is_err());
        let z = Tensor::zeros(&[6, 2]);
        assert!(cramer_test(&z, &z, CramerMethod::Eigenvalue, 10, 0).is_err());
        assert!(ff_test(&grid(4, 0.0), &grid(6, 0.0), 10, 0).is_err());
    }

    #[test]
    fn csv_header() {
        let r = ff_test(&grid(6, 0.0), &grid(6, 5.0), 9, 3).unwrap();
        let mut buf = Vec::new();
        TestResult::write_csv(&[r], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("test,stat,p,method,n,m,seed\nff,"));
    }
}
