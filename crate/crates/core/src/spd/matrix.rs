//! Value types for symmetric, SPD and lower-triangular matrices.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use super::eig::sym_eig;
use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Square symmetric matrix. Storage is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Symmetrizes `m` as `(M + Mᵀ)/2`.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Row-major `n*n` entries, symmetrized.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self::symmetrize(&Matrix::from_row_slice(n, n, data)))
    }

    pub(crate) fn symmetrize(m: &Matrix) -> Self {
        let n = m.nrows();
        debug_assert_eq!(n, m.ncols());
        Self(Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn scale(&self, k: f64) -> SymMatrix {
        SymMatrix(&self.0 * k)
    }

    /// `M ↦ A M Aᵀ` for a square `A`.
    pub fn congruence(&self, a: &Matrix) -> SymMatrix {
        SymMatrix::symmetrize(&(a * &self.0 * a.transpose()))
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

/// Lower bound on the smallest eigenvalue accepted by [`SpdMatrix::new`].
pub fn spd_tolerance(s: &SymMatrix) -> f64 {
    let n = s.dim().max(1) as f64;
    1e-12 * (s.trace() / n).max(1.0)
}

/// Jitter added by [`SpdMatrix::repair`].
pub fn repair_jitter(s: &SymMatrix) -> f64 {
    let n = s.dim().max(1) as f64;
    1e-8 * (s.trace() / n).abs()
}

/// Symmetric positive definite matrix, a point on the SPD manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(SymMatrix);

impl SpdMatrix {
    /// Validates that the smallest eigenvalue exceeds [`spd_tolerance`].
    pub fn new(s: SymMatrix) -> Result<Self> {
        let tol = spd_tolerance(&s);
        let min = min_eigenvalue(&s)?;
        if min > tol {
            Ok(Self(s))
        } else {
            Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min:.3e} <= tolerance {tol:.3e}"
            )))
        }
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        Self::new(SymMatrix::from_matrix(m)?)
    }

    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_row_major(n, data)?)
    }

    /// Like [`SpdMatrix::new`], but on failure retries once with `εI` added,
    /// `ε = 1e-8·trace/n`. The flag reports whether jitter was applied.
    pub fn repair(s: SymMatrix) -> Result<(Self, bool)> {
        match Self::new(s.clone()) {
            Ok(spd) => Ok((spd, false)),
            Err(Error::NotPositiveDefinite(_)) => {
                let eps = repair_jitter(&s);
                let jittered = &s + &SymMatrix::identity(s.dim()).scale(eps);
                Self::new(jittered).map(|spd| (spd, true))
            }
            Err(e) => Err(e),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self(SymMatrix::identity(n))
    }

    /// Diagonal SPD matrix; every entry must be positive.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if let Some(bad) = diag.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::NotPositiveDefinite(format!("diagonal entry {bad}")));
        }
        Ok(Self(SymMatrix::from_diagonal(diag)))
    }

    /// Wraps a matrix that is SPD by construction (e.g. `U·exp(Σ)·Uᵀ`).
    pub(crate) fn from_sym_unchecked(s: SymMatrix) -> Self {
        Self(s)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &Matrix {
        self.0.as_matrix()
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0).unwrap_or(f64::NAN)
    }
}

fn min_eigenvalue(s: &SymMatrix) -> Result<f64> {
    let eig = sym_eig(s)?;
    Ok(eig.sigma().iter().copied().fold(f64::INFINITY, f64::min))
}

/// Lower-triangular matrix (zero strictly above the diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput("lower-triangular matrix must be square".into()));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in i + 1..n {
                if m[(i, j)] != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i},{j}) above the diagonal is {}",
                        m[(i, j)]
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Keeps the lower triangle of `m` and zeroes the rest.
    pub fn from_lower_part(m: &Matrix) -> Self {
        Self(m.lower_triangle())
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `⌊L⌋`, the strictly lower part.
    pub fn strict_lower(&self) -> Matrix {
        let mut m = self.0.clone();
        m.fill_diagonal(0.0);
        m
    }

    pub fn diagonal(&self) -> Vector {
        self.0.diagonal()
    }

    /// Whether this is a Cholesky factor (strictly positive diagonal).
    pub fn is_cholesky_factor(&self) -> bool {
        self.0.diagonal().iter().all(|d| *d > 0.0)
    }
}
