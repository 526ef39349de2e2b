use crate::error::{Error, Result};

use super::tensor::{gemm, Strided, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `x · wᵀ + b` with `x: n x in`, `w: out x in`, `b: out`.
    Linear { x: Var, w: Var, b: Var },
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Exp(Var),
    Sqrt(Var),
    Pow(Var, f64),
    /// `out[j] = in[perm[j]]`, flat indices.
    Permute { x: Var, perm: Vec<usize> },
    RowNorm(Var),
    RowSqNorm(Var),
    PairwiseSqDist(Var, Var),
    Sum(Var),
    Mean(Var),
    OffDiagMean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Wengert list for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the list is topologically
/// sorted by construction and [`Tape::backward`] is a single reverse sweep.
/// A tape is built per batch and dropped afterwards.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a leaf, `None` if the loss does
    /// not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Like [`Gradients::get`] but returns zeros shaped like `like` when the
    /// loss does not depend on the leaf.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let out = linear_forward(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{:?}", sa), format!("{:?}", sb)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::Scale(a, c))
    }

    pub fn shift(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::Shift(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(relu);
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    /// Square root; inputs are clamped at zero and the derivative at zero is
    /// taken as zero.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0).sqrt());
        self.push(out, Op::Sqrt(a))
    }

    /// `x^p` for `x >= 0`; the derivative at zero is taken as zero.
    pub fn pow(&mut self, a: Var, p: f64) -> Var {
        let out = self.value(a).map(|x| x.max(0.0).powf(p));
        self.push(out, Op::Pow(a, p))
    }

    /// Sorts each consecutive group of `group` columns in descending order.
    pub fn groupsort(&mut self, a: Var, group: usize) -> Result<Var> {
        let (out, perm) = groupsort_forward(self.value(a), group)?;
        Ok(self.push(out, Op::Permute { x: a, perm }))
    }

    /// Euclidean norm of every row, as an `n x 1` column.
    pub fn row_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out: Vec<f64> = x.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let n = out.len();
        self.push(Tensor::matrix(n, 1, out), Op::RowNorm(a))
    }

    pub fn row_sq_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out: Vec<f64> = x.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).collect();
        let n = out.len();
        self.push(Tensor::matrix(n, 1, out), Op::RowSqNorm(a))
    }

    /// Matrix of squared Euclidean distances between the rows of `a` and `b`.
    pub fn pairwise_sq_dist(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = pairwise_sq_dist(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::PairwiseSqDist(a, b)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let s = self.value(a).mean();
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Mean of the off-diagonal entries of a square matrix.
    pub fn off_diag_mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let n = x.rows();
        if x.shape().len() != 2 || x.cols() != n || n < 2 {
            return Err(Error::shape(
                "off_diag_mean",
                "square matrix with n >= 2",
                format!("{:?}", x.shape()),
            ));
        }
        let total = x.sum();
        let trace: f64 = (0..n).map(|i| x.get(i, i)).sum();
        let value = (total - trace) / (n * (n - 1)) as f64;
        Ok(self.push(Tensor::scalar(value), Op::OffDiagMean(a)))
    }

    /// Reverse sweep from a scalar `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::shape(
                "backward",
                "scalar loss",
                format!("{:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (n, inp, out) = (xv.rows(), xv.cols(), wv.rows());
                    let mut dx = vec![0.0; n * inp];
                    gemm(
                        n,
                        out,
                        inp,
                        1.0,
                        Strided::row_major(g.data(), out),
                        Strided::row_major(wv.data(), inp),
                        0.0,
                        &mut dx,
                    );
                    let mut dw = vec![0.0; out * inp];
                    gemm(
                        out,
                        n,
                        inp,
                        1.0,
                        Strided::transposed(g.data(), out),
                        Strided::row_major(xv.data(), inp),
                        0.0,
                        &mut dw,
                    );
                    let mut db = vec![0.0; out];
                    for row in g.row_iter() {
                        for (acc, v) in db.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    let bshape = self.value(*b).shape().to_vec();
                    accumulate(&mut grads, *x, Tensor::matrix(n, inp, dx));
                    accumulate(&mut grads, *w, Tensor::matrix(out, inp, dw));
                    accumulate(&mut grads, *b, Tensor::new(bshape, db)?);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    let mut da = vec![0.0; m * k];
                    gemm(
                        m,
                        n,
                        k,
                        1.0,
                        Strided::row_major(g.data(), n),
                        Strided::transposed(bv.data(), n),
                        0.0,
                        &mut da,
                    );
                    let mut db = vec![0.0; k * n];
                    gemm(
                        k,
                        m,
                        n,
                        1.0,
                        Strided::transposed(av.data(), k),
                        Strided::row_major(g.data(), n),
                        0.0,
                        &mut db,
                    );
                    accumulate(&mut grads, *a, Tensor::matrix(m, k, da));
                    accumulate(&mut grads, *b, Tensor::matrix(k, n, db));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(*b), |gv, bv| gv * bv);
                    let db = g.zip_map(self.value(*a), |gv, av| gv * av);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.map(|v| c * v)),
                Op::Shift(a) => accumulate(&mut grads, *a, g),
                Op::Relu(a) => {
                    let d = g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_map(y, |gv, s| gv * s * (1.0 - s));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = g.zip_map(y, |gv, t| gv * (1.0 - t * t));
                    accumulate(&mut grads, *a, d);
                }
                Op::Softplus(a) => {
                    let d = g.zip_map(self.value(*a), |gv, x| gv * sigmoid(x));
                    accumulate(&mut grads, *a, d);
                }
                Op::Exp(a) => {
                    let d = g.zip_map(y, |gv, e| gv * e);
                    accumulate(&mut grads, *a, d);
                }
                Op::Sqrt(a) => {
                    let d = g.zip_map(y, |gv, r| if r > 0.0 { gv / (2.0 * r) } else { 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::Pow(a, p) => {
                    let p = *p;
                    let d = g.zip_map(self.value(*a), |gv, x| {
                        if x > 0.0 {
                            gv * p * x.powf(p - 1.0)
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, d);
                }
                Op::Permute { x, perm } => {
                    let mut d = Tensor::zeros(self.value(*x).shape());
                    let dd = d.data_mut();
                    for (j, &src) in perm.iter().enumerate() {
                        dd[src] += g.data()[j];
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::RowNorm(a) => {
                    let xv = self.value(*a);
                    let mut d = Tensor::zeros(xv.shape());
                    for i in 0..xv.rows() {
                        let r = y.data()[i];
                        if r > 0.0 {
                            let s = g.data()[i] / r;
                            for (dv, xv) in d.row_mut(i).iter_mut().zip(xv.row(i)) {
                                *dv = s * xv;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::RowSqNorm(a) => {
                    let xv = self.value(*a);
                    let mut d = Tensor::zeros(xv.shape());
                    for i in 0..xv.rows() {
                        let s = 2.0 * g.data()[i];
                        for (dv, xv) in d.row_mut(i).iter_mut().zip(xv.row(i)) {
                            *dv = s * xv;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::PairwiseSqDist(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (n, m, k) = (av.rows(), bv.rows(), av.cols());
                    let mut da = Tensor::zeros(av.shape());
                    let mut db = Tensor::zeros(bv.shape());
                    for i in 0..n {
                        let ai = av.row(i);
                        for j in 0..m {
                            let gij = 2.0 * g.data()[i * m + j];
                            if gij == 0.0 {
                                continue;
                            }
                            let bj = bv.row(j);
                            for c in 0..k {
                                let diff = gij * (ai[c] - bj[c]);
                                da.data_mut()[i * k + c] += diff;
                                db.data_mut()[j * k + c] -= diff;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Sum(a) => {
                    let gv = g.data()[0];
                    accumulate(&mut grads, *a, Tensor::full(self.value(*a).shape(), gv));
                }
                Op::Mean(a) => {
                    let xv = self.value(*a);
                    let gv = g.data()[0] / xv.len() as f64;
                    accumulate(&mut grads, *a, Tensor::full(xv.shape(), gv));
                }
                Op::OffDiagMean(a) => {
                    let xv = self.value(*a);
                    let n = xv.rows();
                    let gv = g.data()[0] / (n * (n - 1)) as f64;
                    let mut d = Tensor::full(xv.shape(), gv);
                    for k in 0..n {
                        d.set(k, k, 0.0);
                    }
                    accumulate(&mut grads, *a, d);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `x · wᵀ + b`; shared by the tape and the tape-free forward pass so both
/// produce identical bits.
pub(crate) fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, inp) = (x.rows(), x.cols());
    let (out, winp) = (w.rows(), w.cols());
    if inp != winp {
        return Err(Error::shape(
            "linear",
            format!("input width {}", winp),
            format!("input width {}", inp),
        ));
    }
    if b.len() != out {
        return Err(Error::shape(
            "linear",
            format!("bias length {}", out),
            format!("bias length {}", b.len()),
        ));
    }
    let mut data = Vec::with_capacity(n * out);
    for _ in 0..n {
        data.extend_from_slice(b.data());
    }
    gemm(
        n,
        inp,
        out,
        1.0,
        Strided::row_major(x.data(), inp),
        Strided::transposed(w.data(), inp),
        1.0,
        &mut data,
    );
    Ok(Tensor::matrix(n, out, data))
}

pub(crate) fn groupsort_forward(x: &Tensor, group: usize) -> Result<(Tensor, Vec<usize>)> {
    let cols = x.cols();
    if group == 0 || cols % group != 0 {
        return Err(Error::invalid(format!(
            "groupsort: group size {} does not divide width {}",
            group, cols
        )));
    }
    let mut out = Tensor::zeros(x.shape());
    let mut perm = vec![0usize; x.len()];
    let mut idx: Vec<usize> = Vec::with_capacity(group);
    for r in 0..x.rows() {
        let row = x.row(r);
        for start in (0..cols).step_by(group) {
            idx.clear();
            idx.extend(start..start + group);
            // stable: equal values keep their original order
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            for (k, &src) in idx.iter().enumerate() {
                let flat = r * cols + start + k;
                perm[flat] = r * cols + src;
                out.data_mut()[flat] = row[src];
            }
        }
    }
    Ok((out, perm))
}

pub(crate) fn pairwise_sq_dist(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols() != b.cols() {
        return Err(Error::shape(
            "pairwise_sq_dist",
            format!("{} columns", a.cols()),
            format!("{} columns", b.cols()),
        ));
    }
    let (n, m) = (a.rows(), b.rows());
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let ai = a.row(i);
        for j in 0..m {
            let bj = b.row(j);
            out.push(ai.iter().zip(bj).map(|(p, q)| (p - q) * (p - q)).sum());
        }
    }
    Ok(Tensor::matrix(n, m, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]));
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn gradient_of_squared_norm_at_origin_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(1, 3, vec![0.0; 3]));
        let s = t.row_sq_norm(x);
        let l = t.sum(s);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn least_squares_gradient_closed_form() {
        // f(w) = ||A w - b||^2, grad = 2 Aᵀ (A w - b)
        let a = Tensor::matrix(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0]);
        let w = Tensor::matrix(2, 1, vec![0.3, -0.7]);
        let b = Tensor::matrix(3, 1, vec![1.0, 0.0, -1.0]);
        let mut t = Tape::new();
        let av = t.leaf(a.clone());
        let wv = t.leaf(w.clone());
        let bv = t.leaf(b.clone());
        let aw = t.matmul(av, wv).unwrap();
        let r = t.sub(aw, bv).unwrap();
        let r2 = t.mul(r, r).unwrap();
        let l = t.sum(r2);
        let g = t.backward(l).unwrap();

        let resid = a.matmul(&w).unwrap().zip_map(&b, |p, q| p - q);
        let expected = a.transpose().matmul(&resid).unwrap().map(|v| 2.0 * v);
        for (got, want) in g.get(wv).unwrap().data().iter().zip(expected.data()) {
            assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn groupsort_examples() {
        let x = Tensor::matrix(1, 2, vec![3.0, -1.0]);
        assert_eq!(groupsort_forward(&x, 2).unwrap().0.data(), &[3.0, -1.0]);
        let x = Tensor::matrix(1, 2, vec![-1.0, 3.0]);
        assert_eq!(groupsort_forward(&x, 2).unwrap().0.data(), &[3.0, -1.0]);
        let x = Tensor::matrix(1, 4, vec![1.0, 3.0, -2.0, 0.0]);
        assert_eq!(groupsort_forward(&x, 2).unwrap().0.data(), &[3.0, 1.0, 0.0, -2.0]);
        let x = Tensor::matrix(1, 3, vec![1.0, 3.0, -2.0]);
        assert!(groupsort_forward(&x, 2).is_err());
    }

    #[test]
    fn off_diag_mean_ignores_diagonal() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(2, 2, vec![100.0, 1.0, 3.0, -100.0]));
        let m = t.off_diag_mean(x).unwrap();
        assert_eq!(t.value(m).data()[0], 2.0);
        let g = t.backward(m).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn shared_leaf_accumulates() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let y = t.add(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0]);
    }
}
