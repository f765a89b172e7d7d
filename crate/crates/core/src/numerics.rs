//! Small dense complex-matrix primitives.
//!
//! Everything here targets the tiny effective-channel matrices of a
//! two-cell MIMO link (at most a handful of rows/columns), so the
//! implementations are direct: no pivoting heuristics, no blocking.
//! Values are immutable after construction and safe to share across
//! worker threads.

pub use num_complex::Complex64;
use thiserror::Error;

/// Pivot threshold below which a Cholesky factorization is rejected.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    /// A pivot fell below the tolerance during factorization: the matrix
    /// is not (numerically) Hermitian positive definite.
    #[error("matrix is not positive definite (pivot {pivot:.3e} below {tol:.3e})")]
    NotPositiveDefinite { pivot: f64, tol: f64 },
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries. Panics if the shape is
    /// degenerate or the entry count does not match.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must be at least 1x1");
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![Complex64::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> CVector {
        CVector::new((0..self.rows).map(|r| self.get(r, c)).collect())
    }

    /// Conjugate transpose.
    pub fn conj_transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must match");
        CMatrix::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols)
                .map(|k| self.get(r, k) * other.get(k, c))
                .sum()
        })
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        CVector::new(
            (0..self.rows)
                .map(|r| (0..self.cols).map(|c| self.get(r, c) * v.get(c)).sum())
                .collect(),
        )
    }

    pub fn scaled(&self, factor: f64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// `self + I`, square matrices only.
    pub fn plus_identity(&self) -> CMatrix {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let mut m = self.clone();
        for i in 0..self.rows {
            m.data[i * self.cols + i] += Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows, "row counts must match");
        CMatrix::from_fn(self.rows, self.cols + other.cols, |r, c| {
            if c < self.cols {
                self.get(r, c)
            } else {
                other.get(r, c - self.cols)
            }
        })
    }
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector {
    data: Vec<Complex64>,
}

impl CVector {
    pub fn new(data: Vec<Complex64>) -> Self {
        assert!(!data.is_empty(), "vector must have at least one entry");
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> Complex64 {
        self.data[i]
    }

    pub fn set(&mut self, i: usize, v: Complex64) {
        self.data[i] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn add(&self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len());
        CVector::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len());
        CVector::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// Gram matrix `H† H` (Hermitian positive semi-definite, cols x cols).
pub fn gram(h: &CMatrix) -> CMatrix {
    let mut g = CMatrix::zeros(h.cols(), h.cols());
    for p in 0..h.cols() {
        for q in p..h.cols() {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..h.rows() {
                s += h.get(i, p).conj() * h.get(i, q);
            }
            g.set(p, q, s);
            if p != q {
                g.set(q, p, s.conj());
            } else {
                // force an exactly real diagonal
                g.set(p, p, Complex64::new(s.re, 0.0));
            }
        }
    }
    g
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky, with the
/// default pivot tolerance.
pub fn inverse_hermitian(a: &CMatrix) -> Result<CMatrix, NumericsError> {
    inverse_hermitian_with(a, DEFAULT_PIVOT_TOL)
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky
/// (`A = L L†`), rejecting pivots below `pivot_tol`.
pub fn inverse_hermitian_with(a: &CMatrix, pivot_tol: f64) -> Result<CMatrix, NumericsError> {
    assert_eq!(a.rows(), a.cols(), "square matrix required");
    let n = a.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if d < pivot_tol {
            return Err(NumericsError::NotPositiveDefinite {
                pivot: d,
                tol: pivot_tol,
            });
        }
        let djj = d.sqrt();
        l.set(j, j, Complex64::new(djj, 0.0));
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / djj);
        }
    }
    // Solve L L† X = I column by column.
    let mut inv = CMatrix::zeros(n, n);
    for col in 0..n {
        // forward: L y = e_col
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = if i == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for (k, &yk) in y.iter().enumerate().take(i) {
                s -= l.get(i, k) * yk;
            }
            y[i] = s / l.get(i, i).re;
        }
        // backward: L† x = y
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, &xk) in x.iter().enumerate().skip(i + 1) {
                s -= l.get(k, i).conj() * xk;
            }
            x[i] = s / l.get(i, i).re;
        }
        for (i, &xi) in x.iter().enumerate() {
            inv.set(i, col, xi);
        }
    }
    Ok(inv)
}

/// Frobenius norm: sqrt of the sum of squared entry magnitudes.
pub fn frobenius_norm(h: &CMatrix) -> f64 {
    h.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
