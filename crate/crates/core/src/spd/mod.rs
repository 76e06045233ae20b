//! SPD value types and the matrix functions everything else is built from.

pub mod base;
pub mod eig;
pub mod functions;
pub mod matrix;
pub mod random;
pub mod text;

pub use base::{axis_assignment, base_to_factors, BaseVector, DiagonalFactors, BASE_GUARD};
pub use eig::{cholesky, sym_eig, EigenDecomposition};
pub use functions::{cln, cln_inv, mexp, mgexp, mln, mlog, spd_pow};
pub use matrix::{repair_jitter, spd_tolerance, LowerTriangular, Matrix, SpdMatrix, SymMatrix, Vector};
