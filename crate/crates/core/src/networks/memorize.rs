//! Decoder `D = φ′ ∘ D₀` that pushes a latent reference sample exactly onto
//! a finite set of atoms.
//!
//! `D₀` projects latents onto the first principal direction of the
//! reference sample. The sorted projections are cut into `n` blocks of `r`
//! points, block `j` is sent to atom `j`, and `φ′` ramps linearly between
//! consecutive atoms across the gap separating two blocks. Each ramp is a
//! difference of two ReLU units, so the whole map is a one-hidden-layer
//! ReLU network (see [`MemorizingDecoder::to_mlp`]).

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Tensor;
use crate::data::seeds::{self, derive_seed};
use crate::data::{Dataset, LatentLawSpec};
use crate::error::{Error, Result};

use super::jl::LinearMap;
use super::mlp::{Activation, Mlp, MlpSpec, OutputTransform};

/// Largest reference sample drawn by [`build_memorizing_decoder`].
pub const MAX_REFERENCE: usize = 2000;

const MAX_RESEEDS: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct MemorizingDecoder {
    /// `1 x k` projection.
    pub d0: LinearMap,
    /// Ramp `j` runs over `[starts[j], ends[j]]` from atom `j` to atom `j + 1`.
    pub starts: Vec<f64>,
    pub ends: Vec<f64>,
    /// Atoms in the order they are visited along the projection.
    pub atoms: Tensor,
    /// Reference latent sample (`n * r` rows).
    pub reference: Tensor,
    pub points_per_atom: usize,
    /// Number of times `D₀` was redrawn because of tied projections.
    pub reseeds: u64,
}

impl MemorizingDecoder {
    pub fn latent_dim(&self) -> usize {
        self.d0.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.atoms.cols()
    }

    /// `φ′(s)` for a scalar projection.
    pub fn phi(&self, s: f64, out: &mut [f64]) {
        let n = self.atoms.rows();
        out.copy_from_slice(self.atoms.row(0));
        for j in 0..n - 1 {
            let (a, b) = (self.starts[j], self.ends[j]);
            let t = ((s - a) / (b - a)).clamp(0.0, 1.0);
            if t == 0.0 {
                break;
            }
            let (p, q) = (self.atoms.row(j), self.atoms.row(j + 1));
            for (o, (pv, qv)) in out.iter_mut().zip(p.iter().zip(q)) {
                *o += t * (qv - pv);
            }
        }
    }

    /// `D(z) = φ′(D₀ z)` row by row.
    pub fn decode(&self, latents: &Tensor) -> Result<Tensor> {
        let s = self.d0.apply(latents)?;
        let d = self.output_dim();
        let mut out = Tensor::zeros(&[latents.rows(), d]);
        for i in 0..latents.rows() {
            self.phi(s.get(i, 0), out.row_mut(i));
        }
        Ok(out)
    }

    /// Image of the reference sample.
    pub fn push_reference(&self) -> Result<Tensor> {
        self.decode(&self.reference)
    }

    /// The same map as a `k -> 2(n-1) -> d` ReLU network.
    pub fn to_mlp(&self) -> Result<Mlp> {
        let n = self.atoms.rows();
        let (k, d) = (self.latent_dim(), self.output_dim());
        let w0 = self.d0.matrix().row(0);
        let hidden = (2 * (n - 1)).max(1);
        let mut m0 = Tensor::zeros(&[hidden, k]);
        let mut b0 = Tensor::zeros(&[hidden]);
        let mut m1 = Tensor::zeros(&[d, hidden]);
        for j in 0..n - 1 {
            let (a, b) = (self.starts[j], self.ends[j]);
            m0.row_mut(2 * j).copy_from_slice(w0);
            m0.row_mut(2 * j + 1).copy_from_slice(w0);
            b0.data_mut()[2 * j] = -a;
            b0.data_mut()[2 * j + 1] = -b;
            for c in 0..d {
                let slope = (self.atoms.get(j + 1, c) - self.atoms.get(j, c)) / (b - a);
                m1.set(c, 2 * j, slope);
                m1.set(c, 2 * j + 1, -slope);
            }
        }
        let b1 = Tensor::new(vec![d], self.atoms.row(0).to_vec())?;
        let spec = MlpSpec::new(vec![k, hidden, d], Activation::Relu, OutputTransform::Identity);
        Mlp::from_parts(spec, vec![m0, m1], vec![b0, b1])
    }
}

/// Largest `n` a ReLU network of width `w` and depth `l` on `ℝ^d` is
/// guaranteed to memorize: `(w-d-1)/2 · ⌊(w-d-1)/(6d)⌋ · ⌊l/2⌋ + 2`.
pub fn memorization_capacity(w: usize, l: usize, d: usize) -> usize {
    let free = w.saturating_sub(d + 1);
    if d == 0 {
        return 2;
    }
    (free / 2) * (free / (6 * d)) * (l / 2) + 2
}

fn principal_direction(z: &Tensor) -> Option<Vec<f64>> {
    let (m, k) = (z.rows(), z.cols());
    let mean: Vec<f64> = (0..k).map(|c| (0..m).map(|i| z.get(i, c)).sum::<f64>() / m as f64).collect();
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for row in z.row_iter() {
        for a in 0..k {
            for b in 0..k {
                cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let (best, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(lambda > 0.0) {
        return None;
    }
    let mut v: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Some(v)
}

fn diameter(atoms: &Tensor) -> f64 {
    let mut best = 0.0f64;
    for i in 0..atoms.rows() {
        for j in i + 1..atoms.rows() {
            let d2: f64 = atoms.row(i).iter().zip(atoms.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max(d2.sqrt());
        }
    }
    best
}

/// Builds `D = φ′ ∘ D₀` for the uniform law on the rows of `atoms`.
///
/// The reference sample has `n * r` rows with `r = ⌈diam / ε⌉`, capped so
/// the sample has at most [`MAX_REFERENCE`] rows.
pub fn build_memorizing_decoder(
    atoms: &Dataset,
    latent: &LatentLawSpec,
    eps: f64,
    seed: u64,
) -> Result<MemorizingDecoder> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("memorizing decoder needs eps > 0, got {}", eps)));
    }
    latent.validate()?;
    let n = atoms.n();
    let k = latent.dim();
    let diam = diameter(atoms.matrix());
    let r = ((diam / eps).ceil() as usize).clamp(1, (MAX_REFERENCE / n).max(1));
    let m = n * r;

    for attempt in 0..MAX_RESEEDS {
        let mut rng = seeds::rng(derive_seed(seed, "memorize", &[attempt]));
        let reference = latent.draw(m, &mut rng)?;
        let dir = match principal_direction(&reference) {
            Some(v) if attempt == 0 => v,
            _ => {
                // degenerate or tied projection: draw a random direction
                let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            }
        };
        let d0 = LinearMap::new(Tensor::matrix(1, k, dir), Some(seed))?;
        let proj = d0.apply(&reference)?;
        let mut s: Vec<f64> = proj.data().to_vec();
        s.sort_by(f64::total_cmp);

        let mut starts = Vec::with_capacity(n.saturating_sub(1));
        let mut ends = Vec::with_capacity(n.saturating_sub(1));
        let mut ok = true;
        for j in 1..n {
            let (a, b) = (s[j * r - 1], s[j * r]);
            if !(b > a) {
                ok = false;
                break;
            }
            starts.push(a);
            ends.push(b);
        }
        if !ok {
            continue;
        }

        // visit atoms along their own principal axis so ramps stay short
        let mut order: Vec<usize> = (0..n).collect();
        if n > 1 && atoms.dim() > 0 {
            if let Some(adir) = principal_direction(atoms.matrix()) {
                let key: Vec<f64> = (0..n)
                    .map(|i| atoms.row(i).iter().zip(&adir).map(|(a, b)| a * b).sum())
                    .collect();
                order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
            }
        }
        let ordered = atoms.matrix().select_rows(&order);

        return Ok(MemorizingDecoder {
            d0,
            starts,
            ends,
            atoms: ordered,
            reference,
            points_per_atom: r,
            reseeds: attempt,
        });
    }
    Err(Error::NoConvergence(format!(
        "projection stayed degenerate after {} draws of D0",
        MAX_RESEEDS
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> LatentLawSpec {
        LatentLawSpec::BetaMarginals { a: 1.0, b: 1.0, k: 1 }
    }

    #[test]
    fn single_atom_is_constant() {
        let atoms = Dataset::new(Tensor::matrix(1, 2, vec![0.3, -1.0]), "t", None).unwrap();
        let dec = build_memorizing_decoder(&atoms, &LatentLawSpec::gaussian(2), 0.1, 1).unwrap();
        let out = dec.push_reference().unwrap();
        assert!(out.row_iter().all(|r| r == [0.3, -1.0]));
    }

    #[test]
    fn two_atoms_split_reference_evenly() {
        let atoms = Dataset::new(Tensor::matrix(2, 1, vec![1.0, 0.0]), "t", None).unwrap();
        let dec = build_memorizing_decoder(&atoms, &uniform(), 0.05, 2).unwrap();
        let out = dec.push_reference().unwrap();
        let mut v = out.into_data();
        v.sort_by(f64::total_cmp);
        let half = v.len() / 2;
        assert!(v[..half].iter().all(|&x| x == 0.0));
        assert!(v[half..].iter().all(|&x| x == 1.0));
    }

    #[test]
    fn relu_network_matches_piecewise_map() {
        let atoms = Dataset::new(
            Tensor::matrix(3, 2, vec![0.0, 0.0, 1.0, 2.0, -1.0, 0.5]),
            "t",
            None,
        )
        .unwrap();
        let dec = build_memorizing_decoder(&atoms, &LatentLawSpec::gaussian(2), 0.5, 3).unwrap();
        let net = dec.to_mlp().unwrap();
        assert_eq!(net.spec().widths, vec![2, 4, 2]);
        let a = dec.decode(&dec.reference).unwrap();
        let b = net.forward(&dec.reference).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn capacity_formula() {
        // w = 20, d = 1: (18/2) * (18/6) * (4/2) + 2
        assert_eq!(memorization_capacity(20, 4, 1), 9 * 3 * 2 + 2);
        assert_eq!(memorization_capacity(2, 4, 3), 2);
    }
}
