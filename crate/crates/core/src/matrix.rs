//! Small dense row-major matrices, just enough for state-space work (n <= ~10).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn column(values: &[f64]) -> Self {
        Self::from_row_slice(values.len(), 1, values)
    }

    pub fn row(values: &[f64]) -> Self {
        Self::from_row_slice(1, values.len(), values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimensions");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// `self * x` for a plain vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matrix-vector dimensions");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn add_assign(&mut self, rhs: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Copies the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    /// Matrix exponential by scaling and squaring around a Taylor core.
    ///
    /// The argument is scaled by `2^-s` until its 1-norm is at most 1/2, the
    /// series is summed until the next term is below 1e-18 of the partial sum,
    /// and the result is squared back `s` times.
    pub fn expm(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::InvalidArgument(
                "matrix exponential of a non-square matrix",
            ));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Matrix::zeros(0, 0));
        }
        if !self.is_finite() {
            return Err(Error::MatrixExponential);
        }

        let norm = self.norm_one();
        let mut squarings = 0u32;
        if norm > 0.5 {
            squarings = libm::ceil(libm::log2(norm / 0.5)) as u32;
        }
        if squarings > 1000 {
            return Err(Error::MatrixExponential);
        }
        let scaled = self.scaled(libm::exp2(-(squarings as f64)));

        let mut sum = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        let mut converged = false;
        for k in 1..=60 {
            term = term.mul(&scaled).scaled(1.0 / k as f64);
            sum.add_assign(&term);
            if term.norm_one() <= 1e-18 * sum.norm_one() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::MatrixExponential);
        }

        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        if !sum.is_finite() {
            return Err(Error::MatrixExponential);
        }
        Ok(sum)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}
