use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

use super::dataset::Dataset;
use super::seeds::{self, Rng};

/// Law of the contaminating draws `Y_i`.
#[derive(Clone, Debug, PartialEq)]
pub enum ContaminationLaw {
    /// Standard normal in every coordinate.
    Gaussian,
    /// Independent standard Cauchy coordinates.
    Cauchy,
    /// Dirichlet with the given concentration vector; its length must match
    /// the data dimension.
    Dirichlet(Vec<f64>),
}

impl ContaminationLaw {
    pub fn tag(&self) -> String {
        match self {
            ContaminationLaw::Gaussian => "gaussian".into(),
            ContaminationLaw::Cauchy => "cauchy".into(),
            ContaminationLaw::Dirichlet(a) => {
                let parts: Vec<String> = a.iter().map(|v| format!("{}", v)).collect();
                format!("dirichlet({})", parts.join(";"))
            }
        }
    }

    pub(crate) fn draw(&self, d: usize, rng: &mut Rng, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        match self {
            ContaminationLaw::Gaussian => {
                for _ in 0..d {
                    out.push(StandardNormal.sample(rng));
                }
            }
            ContaminationLaw::Cauchy => {
                let c = Cauchy::new(0.0, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
                for _ in 0..d {
                    out.push(c.sample(rng));
                }
            }
            ContaminationLaw::Dirichlet(alpha) => {
                // normalized independent gammas
                let mut total = 0.0;
                for &a in alpha {
                    let g = Gamma::new(a, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
                    let v: f64 = g.sample(rng);
                    total += v;
                    out.push(v);
                }
                if total <= 0.0 {
                    // every gamma underflowed; fall back to a uniform vertex
                    let k = rng.random_range(0..alpha.len());
                    out.iter_mut().enumerate().for_each(|(j, v)| *v = if j == k { 1.0 } else { 0.0 });
                } else {
                    out.iter_mut().for_each(|v| *v /= total);
                }
            }
        }
        Ok(())
    }
}

/// Per-observation corruption `x <- (1 - level) x + level y` on
/// `floor(fraction * n)` indices drawn without replacement.
#[derive(Clone, Debug, PartialEq)]
pub struct ContaminationSpec {
    pub fraction: f64,
    pub level: f64,
    pub law: ContaminationLaw,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::invalid(format!("contamination fraction {} outside [0, 1]", self.fraction)));
        }
        if !(0.0..=1.0).contains(&self.level) {
            return Err(Error::invalid(format!("contamination level {} outside [0, 1]", self.level)));
        }
        if let ContaminationLaw::Dirichlet(alpha) = &self.law {
            if alpha.len() != d {
                return Err(Error::shape(
                    "contaminate",
                    format!("dirichlet of dimension {}", d),
                    format!("dimension {}", alpha.len()),
                ));
            }
            if alpha.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::invalid("dirichlet concentrations must be positive"));
            }
        }
        Ok(())
    }

    pub fn corrupted_count(&self, n: usize) -> usize {
        (self.fraction * n as f64).floor() as usize
    }
}

/// What [`contaminate`] did to a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ContaminationRecord {
    pub fraction: f64,
    pub level: f64,
    pub law: ContaminationLaw,
    pub seed: u64,
    /// Sorted corrupted row indices.
    pub indices: Vec<usize>,
}

pub fn contaminate(data: &Dataset, spec: &ContaminationSpec) -> Result<Dataset> {
    spec.validate(data.dim())?;
    let n = data.n();
    let d = data.dim();
    let count = spec.corrupted_count(n);
    let mut rng = seeds::rng(spec.seed);
    let mut idx = index::sample(&mut rng, n, count).into_vec();
    idx.sort_unstable();

    let mut out = data.clone();
    let mut m = data.matrix().clone();
    let mut y = Vec::with_capacity(d);
    for &i in &idx {
        spec.law.draw(d, &mut rng, &mut y)?;
        if spec.level == 0.0 {
            continue;
        }
        for (x, yv) in m.row_mut(i).iter_mut().zip(&y) {
            *x = (1.0 - spec.level) * *x + spec.level * yv;
        }
    }
    if !m.is_finite() {
        return Err(Error::numerical("contamination produced non-finite values"));
    }
    out.replace_matrix(m);
    out.contamination = Some(ContaminationRecord {
        fraction: spec.fraction,
        level: spec.level,
        law: spec.law.clone(),
        seed: spec.seed,
        indices: idx,
    });
    Ok(out)
}

/// Monte-Carlo estimate of `E ||X - Y||` with `X` a uniform row of one set
/// and `Y` an independent uniform row of the other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonEstimate {
    pub value: f64,
    pub std_error: f64,
    pub pairs: usize,
}

pub fn wasserstein_epsilon(
    clean: &Dataset,
    contaminated: &Dataset,
    n_pairs: usize,
    seed: u64,
) -> Result<EpsilonEstimate> {
    if clean.dim() != contaminated.dim() {
        return Err(Error::shape("wasserstein_epsilon", clean.dim(), contaminated.dim()));
    }
    if n_pairs == 0 {
        return Err(Error::invalid("wasserstein_epsilon needs n_pairs >= 1"));
    }
    let mut rng = seeds::rng(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_pairs {
        let x = contaminated.row(rng.random_range(0..contaminated.n()));
        let y = clean.row(rng.random_range(0..clean.n()));
        let dist = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        sum += dist;
        sum_sq += dist * dist;
    }
    let k = n_pairs as f64;
    let mean = sum / k;
    let var = if n_pairs > 1 { (sum_sq / k - mean * mean).max(0.0) * k / (k - 1.0) } else { 0.0 };
    Ok(EpsilonEstimate {
        value: mean,
        std_error: (var / k).sqrt(),
        pairs: n_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::data::sample_five_gaussian;

    fn spec(fraction: f64, level: f64, law: ContaminationLaw) -> ContaminationSpec {
        ContaminationSpec {
            fraction,
            level,
            law,
            seed: 42,
        }
    }

    #[test]
    fn level_zero_is_identity() {
        let ds = sample_five_gaussian(100, 1).unwrap();
        let out = contaminate(&ds, &spec(0.5, 0.0, ContaminationLaw::Cauchy)).unwrap();
        assert_eq!(out.matrix(), ds.matrix());
        assert_eq!(out.contamination.as_ref().unwrap().indices.len(), 50);
    }

    #[test]
    fn half_fraction_corrupts_floor_n_over_two() {
        let ds = sample_five_gaussian(101, 1).unwrap();
        let out = contaminate(&ds, &spec(0.5, 0.2, ContaminationLaw::Gaussian)).unwrap();
        let changed = (0..ds.n()).filter(|&i| ds.row(i) != out.row(i)).count();
        assert_eq!(changed, 50);
        assert_eq!(out.contamination.unwrap().indices.len(), 50);
    }

    #[test]
    fn dirichlet_dimension_checked() {
        let ds = sample_five_gaussian(20, 1).unwrap();
        let bad = spec(0.5, 0.2, ContaminationLaw::Dirichlet(vec![5.0, 3.0]));
        assert!(contaminate(&ds, &bad).is_err());
        let good = spec(0.5, 0.2, ContaminationLaw::Dirichlet(vec![5.0, 3.0, 5.0]));
        let out = contaminate(&ds, &good).unwrap();
        // corrupted rows are convex combinations with a simplex point
        for &i in &out.contamination.as_ref().unwrap().indices {
            let y: Vec<f64> = out.row(i).iter().zip(ds.row(i)).map(|(o, x)| (o - 0.8 * x) / 0.2).collect();
            assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(y.iter().all(|&v| v >= -1e-9));
        }
    }

    #[test]
    fn epsilon_point_masses() {
        let a = Dataset::new(Tensor::matrix(1, 2, vec![0.0, 0.0]), "t", None).unwrap();
        let b = Dataset::new(Tensor::matrix(1, 2, vec![3.0, 4.0]), "t", None).unwrap();
        assert_eq!(wasserstein_epsilon(&a, &a, 10, 1).unwrap().value, 0.0);
        assert!((wasserstein_epsilon(&a, &b, 10, 1).unwrap().value - 5.0).abs() < 1e-12);
    }
}
