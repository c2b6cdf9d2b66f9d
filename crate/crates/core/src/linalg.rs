//! Minimal dense and CSR matrix kernels.
//!
//! Row-parallel products keep a fixed per-row reduction order, so results do
//! not depend on the rayon pool size.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        if n == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(n)
            .zip(self.data.par_chunks(self.cols.max(1)))
            .for_each(|(out_row, lhs_row)| {
                for (k, &a) in lhs_row.iter().enumerate() {
                    if a == T::zero() {
                        continue;
                    }
                    for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                        *o += a * b;
                    }
                }
            });
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sum_squares(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Rows selected by `idx`, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from raw parts. Column indices within each row must be sorted.
    pub fn from_parts(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if indptr.len() != n_rows + 1 || indices.len() != values.len() {
            return Err(Error::Shape("inconsistent CSR arrays".into()));
        }
        if indptr.last() != Some(&indices.len()) || indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Shape("indptr is not a valid offset array".into()));
        }
        if indices.iter().any(|&j| j >= n_cols) {
            return Err(Error::Shape("column index out of range".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    /// `self * x` for a vector.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n_rows) {
            let mut acc = T::zero();
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *o = acc;
        }
    }

    /// `self * rhs` for a dense right-hand side.
    pub fn matmul_dense(&self, rhs: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.n_cols != rhs.rows() {
            return Err(Error::Shape(format!(
                "cannot multiply sparse {}x{} by {}x{}",
                self.n_rows,
                self.n_cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let cols = rhs.cols();
        let mut out = DenseMatrix::zeros(self.n_rows, cols);
        if cols == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, out_row)| {
                for (j, v) in self.row(i) {
                    for (o, &b) in out_row.iter_mut().zip(rhs.row(j)) {
                        *o += v * b;
                    }
                }
            });
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }
}
