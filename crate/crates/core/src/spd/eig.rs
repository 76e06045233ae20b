//! Dense symmetric eigendecomposition and Cholesky factorization.

use nalgebra::SymmetricEigen;

use super::matrix::{LowerTriangular, Matrix, SpdMatrix, SymMatrix, Vector};
use crate::error::{Error, Result};

/// Components with magnitude at or below this are skipped when fixing the
/// eigenvector sign.
const SIGN_EPS: f64 = 1e-12;

/// `S = U·diag(σ)·Uᵀ` with `σ` sorted descending and the first nonzero
/// component of every eigenvector positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    u: Matrix,
    sigma: Vector,
}

impl EigenDecomposition {
    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn sigma(&self) -> &Vector {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// `U·diag(d)·Uᵀ`.
    pub fn assemble(&self, d: &[f64]) -> SymMatrix {
        debug_assert_eq!(d.len(), self.dim());
        let mut scaled = self.u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= d[j];
        }
        SymMatrix::symmetrize(&(scaled * self.u.transpose()))
    }

    /// `U·diag(f(σ))·Uᵀ`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> SymMatrix {
        let d: Vec<f64> = self.sigma.iter().map(|s| f(*s)).collect();
        self.assemble(&d)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.assemble(self.sigma.as_slice())
    }

    /// `Uᵀ·M·U`, i.e. `M` expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, m: &Matrix) -> Matrix {
        self.u.transpose() * m * &self.u
    }

    /// `U·M·Uᵀ`.
    pub fn from_eigenbasis(&self, m: &Matrix) -> Matrix {
        &self.u * m * self.u.transpose()
    }
}

pub fn sym_eig(s: &SymMatrix) -> Result<EigenDecomposition> {
    if !s.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = s.dim();
    let raw = SymmetricEigen::new(s.as_matrix().clone());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw.eigenvalues[b].total_cmp(&raw.eigenvalues[a]));

    let mut u = Matrix::zeros(n, n);
    let mut sigma = Vector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = raw.eigenvalues[src];
        let col = raw.eigenvectors.column(src);
        let flip = col
            .iter()
            .find(|v| v.abs() > SIGN_EPS)
            .is_some_and(|v| *v < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        u.set_column(dst, &(col * sign));
    }
    Ok(EigenDecomposition { u, sigma })
}

/// Cholesky factor `L` with `S = L·Lᵀ` and positive diagonal.
pub fn cholesky(s: &SpdMatrix) -> Result<LowerTriangular> {
    let a = s.as_matrix();
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "Cholesky pivot {pivot:.3e} at column {j}"
            )));
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    LowerTriangular::new(l)
}
