//! Minimal dense row-major matrix, sized for small MLPs.

use crate::error::{Error, Result};
use crate::real::Real;

/// Dense row-major matrix of `Real` scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F: Real> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "Matrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { F::one() } else { F::zero() })
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
    pub fn get(&self, r: usize, c: usize) -> F {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// `y = A x`; `x.len()` must equal `cols`.
    pub fn matvec(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch {
                context: "Matrix::matvec",
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut y = vec![F::zero(); self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = F::zero();
            for (a, b) in row.iter().zip(x.iter()) {
                acc = a.mul_add(*b, acc);
            }
            y[r] = acc;
        }
        Ok(y)
    }

    /// `y = Aᵀ x`; `x.len()` must equal `rows`.
    pub fn matvec_transposed(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.rows {
            return Err(Error::ShapeMismatch {
                context: "Matrix::matvec_transposed",
                expected: self.rows,
                got: x.len(),
            });
        }
        let mut y = vec![F::zero(); self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            let row = self.row(r);
            for (c, a) in row.iter().enumerate() {
                y[c] = a.mul_add(xr, y[c]);
            }
        }
        Ok(y)
    }

    /// Rank-one accumulation `A += u vᵀ` (used for weight gradients).
    pub fn add_outer(&mut self, u: &[F], v: &[F]) -> Result<()> {
        if u.len() != self.rows {
            return Err(Error::ShapeMismatch {
                context: "Matrix::add_outer rows",
                expected: self.rows,
                got: u.len(),
            });
        }
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                context: "Matrix::add_outer cols",
                expected: self.cols,
                got: v.len(),
            });
        }
        for r in 0..self.rows {
            let ur = u[r];
            let row = self.row_mut(r);
            for (c, val) in row.iter_mut().enumerate() {
                *val = ur.mul_add(v[c], *val);
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
