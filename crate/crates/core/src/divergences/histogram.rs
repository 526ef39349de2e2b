use std::collections::BTreeMap;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Default bins per axis.
pub const DEFAULT_BINS: usize = 50;

/// Regular grid over a box, one `(lo, hi, bins)` triple per axis. Points
/// outside the box are counted in the nearest edge bin.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramGrid {
    pub axes: Vec<(f64, f64, usize)>,
}

impl HistogramGrid {
    pub fn new(axes: Vec<(f64, f64, usize)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("histogram grid needs at least one axis"));
        }
        for &(lo, hi, bins) in &axes {
            if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("bad histogram axis ({}, {}, {})", lo, hi, bins)));
            }
        }
        Ok(HistogramGrid { axes })
    }

    /// Bounding box of both samples expanded by 5% per side.
    pub fn pooled(x: &Tensor, y: &Tensor, bins: usize) -> Result<Self> {
        if x.cols() != y.cols() || x.cols() == 0 {
            return Err(Error::shape("HistogramGrid::pooled", x.cols(), y.cols()));
        }
        if x.rows() + y.rows() == 0 {
            return Err(Error::invalid("histogram grid needs at least one point"));
        }
        let axes = (0..x.cols())
            .map(|c| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for r in x.row_iter().chain(y.row_iter()) {
                    lo = lo.min(r[c]);
                    hi = hi.max(r[c]);
                }
                let span = if hi > lo { hi - lo } else { 1.0 };
                (lo - 0.05 * span, hi + 0.05 * span, bins)
            })
            .collect();
        HistogramGrid::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    fn key(&self, p: &[f64]) -> Vec<u32> {
        self.axes
            .iter()
            .zip(p)
            .map(|(&(lo, hi, bins), &v)| {
                let t = ((v - lo) / (hi - lo) * bins as f64).floor();
                t.clamp(0.0, (bins - 1) as f64) as u32
            })
            .collect()
    }

    /// Occupied bins and their masses, summing to one.
    pub fn masses(&self, x: &Tensor) -> Result<BTreeMap<Vec<u32>, f64>> {
        if x.cols() != self.dim() {
            return Err(Error::shape("HistogramGrid::masses", self.dim(), x.cols()));
        }
        if x.rows() == 0 {
            return Err(Error::invalid("histogram of an empty sample"));
        }
        let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
        for r in x.row_iter() {
            *counts.entry(self.key(r)).or_insert(0) += 1;
        }
        let n = x.rows() as f64;
        Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect())
    }

    fn aligned(&self, x: &Tensor, y: &Tensor) -> Result<Vec<(f64, f64)>> {
        let p = self.masses(x)?;
        let q = self.masses(y)?;
        let mut keys: Vec<&Vec<u32>> = p.keys().chain(q.keys()).collect();
        keys.sort();
        keys.dedup();
        Ok(keys
            .into_iter()
            .map(|k| (p.get(k).copied().unwrap_or(0.0), q.get(k).copied().unwrap_or(0.0)))
            .collect())
    }
}

/// `½ Σ |p_b - q_b|`.
pub fn tv_from_masses(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `½ KL(p‖m) + ½ KL(q‖m)` with `m = (p + q) / 2`, natural log.
pub fn js_from_masses(p: &[f64], q: &[f64]) -> f64 {
    let term = |a: f64, m: f64| if a > 0.0 { a * (a / m).ln() } else { 0.0 };
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * term(a, m) + 0.5 * term(b, m)
        })
        .sum();
    js.clamp(0.0, std::f64::consts::LN_2)
}

pub fn hist_tv(x: &Tensor, y: &Tensor, grid: &HistogramGrid) -> Result<f64> {
    let pq = grid.aligned(x, y)?;
    let (p, q): (Vec<f64>, Vec<f64>) = pq.into_iter().unzip();
    Ok(tv_from_masses(&p, &q).clamp(0.0, 1.0))
}

pub fn hist_js(x: &Tensor, y: &Tensor, grid: &HistogramGrid) -> Result<f64> {
    let pq = grid.aligned(x, y)?;
    let (p, q): (Vec<f64>, Vec<f64>) = pq.into_iter().unzip();
    Ok(js_from_masses(&p, &q))
}
