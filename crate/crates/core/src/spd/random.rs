//! Seeded generators for random symmetric, SPD and orthogonal matrices.
//! Used by tests, examples, the gradient self-check and the benchmarks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::base::BaseVector;
use super::matrix::{Matrix, SpdMatrix, SymMatrix};

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Symmetric matrix with i.i.d. Gaussian entries of the given scale.
pub fn random_sym<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> SymMatrix {
    let g = gaussian_matrix(rng, n, n) * scale;
    SymMatrix::symmetrize(&g)
}

/// Haar-distributed rotation (orthogonal with determinant +1).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let qr = gaussian_matrix(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let flipped = -q.column(j);
            q.set_column(j, &flipped);
        }
    }
    if q.determinant() < 0.0 {
        let flipped = -q.column(0);
        q.set_column(0, &flipped);
    }
    q
}

/// SPD matrix `Q·diag(λ)·Qᵀ` with `ln λ` uniform so that the condition number
/// is at most `cond_max`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, cond_max: f64) -> SpdMatrix {
    let q = random_rotation(rng, n);
    let span = cond_max.ln();
    let shift = rng.random_range(-1.0..1.0);
    let lambda: Vec<f64> = (0..n)
        .map(|_| (shift + rng.random_range(-0.5..0.5) * span).exp())
        .collect();
    let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(lambda));
    SpdMatrix::from_sym_unchecked(SymMatrix::symmetrize(&(&q * d * q.transpose())))
}

/// Non-constant base vector with `|ln aᵢ| ∈ [0.25, 2.5]` and random signs.
pub fn random_base_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> BaseVector {
    let b: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.random_range(0.25..2.5);
            if rng.random_bool(0.25) {
                -mag
            } else {
                mag
            }
        })
        .collect();
    BaseVector::from_log_bases(&b).expect("magnitudes are above the guard")
}

/// `rows × cols` matrix with orthonormal rows: the sign-fixed Q factor of a
/// Gaussian `cols × rows` matrix, transposed.
pub fn random_row_orthonormal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let qr = gaussian_matrix(rng, cols, rows).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..rows {
        if r[(j, j)] < 0.0 {
            let flipped = -q.column(j);
            q.set_column(j, &flipped);
        }
    }
    q.transpose()
}
