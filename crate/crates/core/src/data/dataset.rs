use std::io::{Read, Write};

use rand::seq::index;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::contamination::ContaminationRecord;
use super::seeds;

/// An `n x d` sample with enough provenance to regenerate it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    matrix: Tensor,
    pub generator: String,
    pub seed: Option<u64>,
    pub contamination: Option<ContaminationRecord>,
    /// Optional per-row labels (mixture component, MNIST digit).
    pub labels: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(matrix: Tensor, generator: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        if matrix.shape().len() != 2 || matrix.rows() == 0 {
            return Err(Error::invalid(format!(
                "dataset needs an n x d matrix with n >= 1, got shape {:?}",
                matrix.shape()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Dataset {
            matrix,
            generator: generator.into(),
            seed,
            contamination: None,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::shape("Dataset::with_labels", self.n(), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn into_matrix(self) -> Tensor {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub(crate) fn replace_matrix(&mut self, matrix: Tensor) {
        debug_assert_eq!(matrix.shape(), self.matrix.shape());
        self.matrix = matrix;
    }

    /// Rows at `idx`, keeping provenance and labels.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            matrix: self.matrix.select_rows(idx),
            generator: self.generator.clone(),
            seed: self.seed,
            contamination: self.contamination.clone(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.n())).collect();
        self.select(&idx)
    }

    /// Uniform subsample of `n` rows without replacement; rows keep their
    /// original relative order.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 || n > self.n() {
            return Err(Error::invalid(format!(
                "cannot subsample {} rows from a dataset of {}",
                n,
                self.n()
            )));
        }
        if n == self.n() {
            return Ok(self.clone());
        }
        let mut rng = seeds::rng(seed);
        let mut idx = index::sample(&mut rng, self.n(), n).into_vec();
        idx.sort_unstable();
        Ok(self.select(&idx))
    }

    /// Writes the matrix as CSV with a `x0,x1,...` header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let header: Vec<String> = (0..self.dim()).map(|j| format!("x{}", j)).collect();
        wtr.write_record(&header)?;
        for row in self.matrix.row_iter() {
            wtr.write_record(row.iter().map(|v| format!("{}", v)))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a numeric CSV with one header line.
    pub fn read_csv<R: Read>(r: R, generator: &str) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut data = Vec::new();
        let mut cols = None;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if *cols.get_or_insert(rec.len()) != rec.len() {
                return Err(Error::invalid(format!("ragged CSV at data line {}", line + 1)));
            }
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::invalid(format!("non-numeric CSV field '{}' at data line {}", field, line + 1))
                })?;
                data.push(v);
            }
        }
        let cols = cols.ok_or_else(|| Error::invalid("empty CSV"))?;
        let rows = data.len() / cols.max(1);
        Dataset::new(Tensor::matrix(rows, cols, data), generator, None)
    }
}
