use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const TOL: f64 = 1e-10;

/// A finite group of orthogonal `k x k` matrices acting on `ℝ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroup {
    name: String,
    elements: Vec<Tensor>,
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

impl FiniteGroup {
    /// Validates orthogonality, presence of the identity and closure.
    pub fn new(name: impl Into<String>, elements: Vec<Tensor>) -> Result<Self> {
        let k = match elements.first() {
            Some(e) => e.rows(),
            None => return Err(Error::invalid("group needs at least one element")),
        };
        let id = Tensor::identity(k);
        for e in &elements {
            if e.shape() != [k, k] {
                return Err(Error::shape("FiniteGroup::new", format!("[{}, {}]", k, k), format!("{:?}", e.shape())));
            }
            let gram = e.transpose().matmul(e)?;
            if max_abs_diff(&gram, &id) >= TOL {
                return Err(Error::invalid("group element is not orthogonal"));
            }
        }
        if !elements.iter().any(|e| max_abs_diff(e, &id) < TOL) {
            return Err(Error::invalid("group does not contain the identity"));
        }
        for a in &elements {
            for b in &elements {
                let ab = a.matmul(b)?;
                if !elements.iter().any(|e| max_abs_diff(e, &ab) < TOL) {
                    return Err(Error::invalid("group is not closed under products"));
                }
            }
        }
        Ok(FiniteGroup {
            name: name.into(),
            elements,
        })
    }

    pub fn trivial(k: usize) -> Self {
        FiniteGroup {
            name: "trivial".into(),
            elements: vec![Tensor::identity(k)],
        }
    }

    /// `{I, -I}`.
    pub fn sign_flip(k: usize) -> Self {
        let id = Tensor::identity(k);
        let neg = id.map(|v| -v);
        FiniteGroup {
            name: "sign_flip".into(),
            elements: vec![id, neg],
        }
    }

    /// Planar rotations by multiples of `2π/m`, identity first.
    pub fn cyclic(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("cyclic group order must be >= 1"));
        }
        let elements = (0..m)
            .map(|j| {
                // quarter turns get exact entries
                let (s, c) = if (4 * j) % m == 0 {
                    [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)][(4 * j / m) % 4]
                } else {
                    (2.0 * std::f64::consts::PI * j as f64 / m as f64).sin_cos()
                };
                Tensor::matrix(2, 2, vec![c, -s, s, c])
            })
            .collect();
        FiniteGroup::new(format!("C{}", m), elements)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn elements(&self) -> &[Tensor] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].rows()
    }

    pub(crate) fn is_identity(&self, idx: usize) -> bool {
        max_abs_diff(&self.elements[idx], &Tensor::identity(self.dim())) < TOL
    }

    /// `σ_idx · z`.
    pub fn act(&self, idx: usize, z: &[f64], out: &mut [f64]) {
        let m = &self.elements[idx];
        for (r, o) in out.iter_mut().enumerate() {
            *o = m.row(r).iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }
}
