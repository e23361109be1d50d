//! Dense row-major matrices of `f64`.
//!
//! `Tensor` is a plain value type; differentiation lives in
//! [`crate::autodiff`], which records operations over tensors on a tape.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Work threshold (multiply-adds) above which matrix products are split
/// across rows on the rayon pool. Each output row is computed by the same
/// sequential loop either way, so results are bit-identical.
const PAR_THRESHOLD: usize = 1 << 18;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// Builds a tensor from row-major data; fails if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a tensor from nested rows. Panics on ragged input; intended for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest absolute difference between `self[i][j]` and `self[j][i]`.
    /// Non-square tensors report infinity.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn scale_assign(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (m, p, q) = (self.rows, self.cols, other.cols);
        let mut out = Tensor::zeros(m, q);
        let kernel = |(i, orow): (usize, &mut [f64])| {
            let arow = &self.data[i * p..(i + 1) * p];
            for (k, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * q..(k + 1) * q];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        };
        if q == 0 {
            return Ok(out);
        }
        if m * p * q >= PAR_THRESHOLD {
            out.data.par_chunks_mut(q).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(q).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `selfᵀ · other`, without materializing the transpose.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows != other.rows {
            return Err(Error::Shape {
                op: "matmul_tn",
                left: self.shape(),
                right: other.shape(),
            });
        }
        // Row i of the output accumulates self[k][i] * other[k][..] over k.
        let (n, p, q) = (self.rows, self.cols, other.cols);
        let mut out = Tensor::zeros(p, q);
        if q == 0 {
            return Ok(out);
        }
        let kernel = |(i, orow): (usize, &mut [f64])| {
            for k in 0..n {
                let a = self.data[k * p + i];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * q..(k + 1) * q];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        };
        if n * p * q >= PAR_THRESHOLD {
            out.data.par_chunks_mut(q).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(q).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `self · otherᵀ`, without materializing the transpose.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.cols {
            return Err(Error::Shape {
                op: "matmul_nt",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (m, p, q) = (self.rows, self.cols, other.rows);
        let mut out = Tensor::zeros(m, q);
        if q == 0 {
            return Ok(out);
        }
        let kernel = |(i, orow): (usize, &mut [f64])| {
            let arow = &self.data[i * p..(i + 1) * p];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = &other.data[j * p..(j + 1) * p];
                *o = arow.iter().zip(brow).map(|(a, b)| a * b).sum();
            }
        };
        if m * p * q >= PAR_THRESHOLD {
            out.data.par_chunks_mut(q).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(q).enumerate().for_each(kernel);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_times_matrix_is_matrix() {
        let m = Tensor::from_rows(&[[1.5, -2.0], [0.25, 7.0]]);
        assert_eq!(Tensor::identity(2).matmul(&m).unwrap(), m);
    }

    #[test]
    fn hand_multiplied_product() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Tensor::from_rows(&[[1.0], [1.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, Tensor::from_rows(&[[3.0], [7.0]]));
    }

    #[test]
    fn mismatched_inner_dims_name_both_shapes() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("(2, 3)"), "{err}");
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a = Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let b = Tensor::from_rows(&[[0.5, -1.0], [2.0, 0.0]]);
        let tn = a.matmul_tn(&b).unwrap();
        assert_eq!(tn, a.transpose().matmul(&b).unwrap());
        let c = Tensor::from_rows(&[[1.0, 0.0, -1.0], [2.0, 1.0, 0.5]]);
        assert_eq!(a.matmul_nt(&c).unwrap(), a.matmul(&c.transpose()).unwrap());
    }

    #[test]
    fn large_products_match_small_path() {
        // 80*80*80 crosses the parallel threshold; compare with a naive triple loop.
        let n = 80;
        let a = Tensor::from_vec(n, n, (0..n * n).map(|i| ((i * 7) % 13) as f64 - 6.0).collect()).unwrap();
        let b = Tensor::from_vec(n, n, (0..n * n).map(|i| ((i * 5) % 11) as f64 * 0.5).collect()).unwrap();
        let c = a.matmul(&b).unwrap();
        for i in (0..n).step_by(17) {
            for j in (0..n).step_by(13) {
                let mut s = 0.0;
                for k in 0..n {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - s).abs() < 1e-9);
            }
        }
    }
}
