//! Base vectors of the generalized matrix logarithm and their pairing with
//! eigenvectors.
//!
//! A base vector `α = (a₁, …, aₙ)` assigns one logarithm base per coordinate
//! axis. For a diagonal matrix, `mlog` is the diagonal logarithm
//! `diag(log_{a₁} x₁₁, …, log_{aₙ} xₙₙ)`. For a general SPD matrix, base `aᵢ`
//! is applied to the eigenvalue whose eigenvector is assigned to axis `i` by
//! [`axis_assignment`].
//!
//! The assignment only looks at eigenvector directions, so a matrix and its
//! generalized logarithm (which share eigenvectors) always pair the same way
//! and `mgexp(mlog(S)) = S` holds exactly for non-constant bases.

use super::eig::EigenDecomposition;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Minimum `|ln aᵢ|`; a base too close to 1 makes `1/ln aᵢ` blow up.
pub const BASE_GUARD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct BaseVector {
    alpha: Vec<f64>,
    log_base: Vec<f64>,
}

impl BaseVector {
    pub fn from_alpha(alpha: &[f64]) -> Result<Self> {
        let log_base: Vec<f64> = alpha
            .iter()
            .map(|a| {
                if a.is_finite() && *a > 0.0 {
                    Ok(a.ln())
                } else {
                    Err(Error::InvalidParameter(format!("base {a} is not a positive finite number")))
                }
            })
            .collect::<Result<_>>()?;
        check_guard(&log_base)?;
        Ok(Self {
            alpha: alpha.to_vec(),
            log_base,
        })
    }

    /// Builds the vector from `bᵢ = ln aᵢ` (the divisor diagonal).
    pub fn from_log_bases(log_base: &[f64]) -> Result<Self> {
        if let Some(b) = log_base.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("log-base {b} is not finite")));
        }
        check_guard(log_base)?;
        Ok(Self {
            alpha: log_base.iter().map(|b| b.exp()).collect(),
            log_base: log_base.to_vec(),
        })
    }

    /// `α = (e, …, e)`, for which `mlog` is the natural matrix logarithm.
    pub fn natural(n: usize) -> Self {
        Self {
            alpha: vec![std::f64::consts::E; n],
            log_base: vec![1.0; n],
        }
    }

    pub fn constant(n: usize, a: f64) -> Result<Self> {
        Self::from_alpha(&vec![a; n])
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `ln aᵢ` per axis.
    pub fn log_bases(&self) -> &[f64] {
        &self.log_base
    }

    /// Multiplier `A = diag(1/ln aᵢ)` and divisor `B = diag(ln aᵢ)`.
    pub fn factors(&self) -> DiagonalFactors {
        DiagonalFactors {
            multiplier: self.log_base.iter().map(|b| 1.0 / b).collect(),
            divisor: self.log_base.clone(),
        }
    }

    /// `ln a` for the axis paired with each eigenvector of `eig`, in
    /// eigen-order.
    pub fn paired_log_bases(&self, eig: &EigenDecomposition) -> Result<Vec<f64>> {
        self.check_dim(eig.dim())?;
        Ok(axis_assignment(eig.u())
            .into_iter()
            .map(|axis| self.log_base[axis])
            .collect())
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }
}

fn check_guard(log_base: &[f64]) -> Result<()> {
    if let Some((i, b)) = log_base.iter().enumerate().find(|(_, b)| b.abs() < BASE_GUARD) {
        return Err(Error::InvalidParameter(format!(
            "|ln a_{i}| = {:.3e} is below the guard {BASE_GUARD:e}",
            b.abs()
        )));
    }
    Ok(())
}

/// The rewrite `mlog(S) = U·A·ln(Σ)·Uᵀ = U·(ln Σ / B)·Uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalFactors {
    pub multiplier: Vec<f64>,
    pub divisor: Vec<f64>,
}

pub fn base_to_factors(alpha: &BaseVector) -> DiagonalFactors {
    alpha.factors()
}

/// Assigns every eigenvector (column `j` of `u`) to a distinct coordinate
/// axis. Entries are visited in decreasing `|u_ij|` and an entry is taken
/// when neither its row nor its column has been used; ties break by index.
/// Returns `axis[j]`.
pub fn axis_assignment(u: &Matrix) -> Vec<usize> {
    let n = u.ncols();
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            entries.push((u[(i, j)].abs(), i, j));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut axis = vec![usize::MAX; n];
    let mut axis_used = vec![false; n];
    let mut remaining = n;
    for (_, i, j) in entries {
        if remaining == 0 {
            break;
        }
        if axis[j] == usize::MAX && !axis_used[i] {
            axis[j] = i;
            axis_used[i] = true;
            remaining -= 1;
        }
    }
    axis
}
