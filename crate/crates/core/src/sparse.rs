//! Compressed sparse row matrices for the propagation operator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const PAR_THRESHOLD: usize = 1 << 18;

/// Square or rectangular CSR matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Columns within a row must be
    /// strictly increasing and `< cols`.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (c, v) in row {
                if c >= cols || prev.is_some_and(|p| p >= c) {
                    return Err(Error::Contract(format!(
                        "csr row {i}: column {c} out of order or out of range"
                    )));
                }
                prev = Some(c);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: n,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out.set(i, j, v);
            }
        }
        out
    }

    /// `self · x` for dense `x`.
    pub fn matmul(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.cols {
            return Err(Error::Shape {
                op: "sparse_matmul",
                left: (self.rows, self.cols),
                right: x.shape(),
            });
        }
        let h = x.cols();
        let mut out = Tensor::zeros(self.rows, h);
        if h == 0 {
            return Ok(out);
        }
        let kernel = |(i, orow): (usize, &mut [f64])| {
            for (j, a) in self.row(i) {
                for (o, &b) in orow.iter_mut().zip(x.row(j)) {
                    *o += a * b;
                }
            }
        };
        if self.nnz() * h >= PAR_THRESHOLD {
            out.data_mut().par_chunks_mut(h).enumerate().for_each(kernel);
        } else {
            out.data_mut().chunks_mut(h).enumerate().for_each(kernel);
        }
        Ok(out)
    }
}
