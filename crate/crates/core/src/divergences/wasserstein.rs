use rand::seq::index;

use crate::autodiff::Tensor;
use crate::data::seeds;
use crate::error::{Error, Result};

use super::assignment::{linear_assignment, transportation_simplex};

/// Ground metric on `ℝ^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
}

impl Metric {
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

/// Default subsampling cap for [`w1_exact_capped`].
pub const W1_EXACT_CAP: usize = 3000;

pub fn cost_matrix(x: &Tensor, y: &Tensor, metric: Metric) -> Vec<f64> {
    let mut c = Vec::with_capacity(x.rows() * y.rows());
    for xi in x.row_iter() {
        for yj in y.row_iter() {
            c.push(metric.dist(xi, yj));
        }
    }
    c
}

fn check(x: &Tensor, y: &Tensor) -> Result<()> {
    if x.shape().len() != 2 || y.shape().len() != 2 || x.cols() != y.cols() {
        return Err(Error::shape("w1_exact", format!("{:?}", x.shape()), format!("{:?}", y.shape())));
    }
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::invalid("w1_exact needs non-empty point sets"));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `∫ |F(t) - G(t)| dt` for two empirical laws on the line.
fn w1_line(x: &[f64], y: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    if xs.len() == ys.len() {
        return xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).sum::<f64>() / xs.len() as f64;
    }
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut fx, mut gy) = (0.0f64, 0.0f64);
    let mut last = xs[0].min(ys[0]);
    let mut total = 0.0;
    while i < xs.len() || j < ys.len() {
        let take_x = j >= ys.len() || (i < xs.len() && xs[i] <= ys[j]);
        let t = if take_x { xs[i] } else { ys[j] };
        total += (fx - gy).abs() * (t - last);
        last = t;
        if take_x {
            i += 1;
            fx = i as f64 / n;
        } else {
            j += 1;
            gy = j as f64 / m;
        }
    }
    total
}

/// Exact 1-Wasserstein distance between the uniform empirical measures on
/// the rows of `x` and `y`.
///
/// One-dimensional inputs use the quantile coupling. Otherwise `n = m`
/// is solved as a linear assignment and `n ≠ m` by the transportation
/// simplex with integer masses `m / g` and `n / g`, `g = gcd(n, m)`.
pub fn w1_exact(x: &Tensor, y: &Tensor, metric: Metric) -> Result<f64> {
    check(x, y)?;
    let (n, m) = (x.rows(), y.rows());
    if x.cols() == 1 {
        return Ok(w1_line(x.data(), y.data()));
    }
    let cost = cost_matrix(x, y, metric);
    if n == m {
        let (total, _) = linear_assignment(&cost, n)?;
        return Ok(total / n as f64);
    }
    let g = gcd(n, m);
    let a = vec![(m / g) as i64; n];
    let b = vec![(n / g) as i64; m];
    let (total, _) = transportation_simplex(&a, &b, &cost)?;
    Ok(total / (n * m / g) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct W1Estimate {
    pub value: f64,
    /// Whether either set was subsampled to the cap.
    pub subsampled: bool,
    pub n_used: usize,
    pub m_used: usize,
}

/// [`w1_exact`] after independently subsampling each set to at most `cap`
/// rows, uniformly without replacement.
pub fn w1_exact_capped(x: &Tensor, y: &Tensor, metric: Metric, cap: usize, seed: u64) -> Result<W1Estimate> {
    check(x, y)?;
    if cap == 0 {
        return Err(Error::invalid("w1 cap must be positive"));
    }
    let mut rng = seeds::rng(seed);
    let mut shrink = |t: &Tensor| -> Option<Tensor> {
        if t.rows() <= cap {
            return None;
        }
        let mut idx = index::sample(&mut rng, t.rows(), cap).into_vec();
        idx.sort_unstable();
        Some(t.select_rows(&idx))
    };
    let xs = shrink(x);
    let ys = shrink(y);
    let subsampled = xs.is_some() || ys.is_some();
    let xr = xs.as_ref().unwrap_or(x);
    let yr = ys.as_ref().unwrap_or(y);
    Ok(W1Estimate {
        value: w1_exact(xr, yr, metric)?,
        subsampled,
        n_used: xr.rows(),
        m_used: yr.rows(),
    })
}
