//! Scalar matrix functions on SPD matrices: natural and generalized
//! logarithms, their inverses, and the Cholesky logarithm.

use super::base::BaseVector;
use super::eig::{cholesky, sym_eig, EigenDecomposition};
use super::matrix::{LowerTriangular, Matrix, SpdMatrix, SymMatrix};
use crate::error::{Error, Result};

/// Largest exponent accepted before `exp` is considered to overflow.
pub const MAX_EXPONENT: f64 = 700.0;

fn check_exponents(exponents: &[f64]) -> Result<()> {
    if let Some(x) = exponents.iter().find(|x| !(**x <= MAX_EXPONENT)) {
        return Err(Error::Overflow(format!("exponent {x:.3e} exceeds {MAX_EXPONENT}")));
    }
    Ok(())
}

pub fn mln(s: &SpdMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(s.as_sym())?;
    Ok(eig.map(f64::ln))
}

pub fn mexp(x: &SymMatrix) -> Result<SpdMatrix> {
    let eig = sym_eig(x)?;
    check_exponents(eig.sigma().as_slice())?;
    Ok(SpdMatrix::from_sym_unchecked(eig.map(f64::exp)))
}

/// `mlog(S) = U·diag(ln σⱼ / ln a_{π(j)})·Uᵀ`.
pub fn mlog(s: &SpdMatrix, alpha: &BaseVector) -> Result<SymMatrix> {
    let eig = sym_eig(s.as_sym())?;
    mlog_from_eig(&eig, alpha)
}

pub fn mlog_from_eig(eig: &EigenDecomposition, alpha: &BaseVector) -> Result<SymMatrix> {
    let b = alpha.paired_log_bases(eig)?;
    let d: Vec<f64> = eig
        .sigma()
        .iter()
        .zip(&b)
        .map(|(s, b)| s.ln() / b)
        .collect();
    Ok(eig.assemble(&d))
}

/// Inverse of [`mlog`]: `U·diag(a_{π(j)}^{xⱼ})·Uᵀ`.
pub fn mgexp(x: &SymMatrix, alpha: &BaseVector) -> Result<SpdMatrix> {
    let eig = sym_eig(x)?;
    mgexp_from_eig(&eig, alpha)
}

pub fn mgexp_from_eig(eig: &EigenDecomposition, alpha: &BaseVector) -> Result<SpdMatrix> {
    let b = alpha.paired_log_bases(eig)?;
    let exponents: Vec<f64> = eig.sigma().iter().zip(&b).map(|(x, b)| b * x).collect();
    check_exponents(&exponents)?;
    let d: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
    Ok(SpdMatrix::from_sym_unchecked(eig.assemble(&d)))
}

/// `U·A·ln(Σ)·Uᵀ` with the multiplier diagonal taken in axis order.
pub fn mlog_multiplier_form(s: &SpdMatrix, multiplier: &[f64]) -> Result<SymMatrix> {
    let eig = sym_eig(s.as_sym())?;
    let axis = super::base::axis_assignment(eig.u());
    if multiplier.len() != eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            got: multiplier.len(),
        });
    }
    let d: Vec<f64> = eig
        .sigma()
        .iter()
        .zip(&axis)
        .map(|(s, &i)| multiplier[i] * s.ln())
        .collect();
    Ok(eig.assemble(&d))
}

/// `U·(ln Σ / B)·Uᵀ` with the divisor diagonal taken in axis order.
pub fn mlog_divisor_form(s: &SpdMatrix, divisor: &[f64]) -> Result<SymMatrix> {
    let eig = sym_eig(s.as_sym())?;
    let axis = super::base::axis_assignment(eig.u());
    if divisor.len() != eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            got: divisor.len(),
        });
    }
    let d: Vec<f64> = eig
        .sigma()
        .iter()
        .zip(&axis)
        .map(|(s, &i)| s.ln() / divisor[i])
        .collect();
    Ok(eig.assemble(&d))
}

/// Cholesky logarithm `⌊L⌋ + ln 𝔻(L)`.
pub fn cln(s: &SpdMatrix) -> Result<LowerTriangular> {
    let l = cholesky(s)?;
    let mut m = l.into_matrix();
    for i in 0..m.nrows() {
        m[(i, i)] = m[(i, i)].ln();
    }
    LowerTriangular::new(m)
}

/// Inverse of [`cln`]: `L = ⌊X⌋ + exp 𝔻(X)`, returns `L·Lᵀ`.
pub fn cln_inv(x: &LowerTriangular) -> Result<SpdMatrix> {
    let l = cholesky_from_log_chart(x)?;
    Ok(SpdMatrix::from_sym_unchecked(SymMatrix::symmetrize(&(&l * l.transpose()))))
}

pub(crate) fn cholesky_from_log_chart(x: &LowerTriangular) -> Result<Matrix> {
    let diag: Vec<f64> = x.diagonal().iter().copied().collect();
    check_exponents(&diag)?;
    let mut l = x.as_matrix().clone();
    for i in 0..l.nrows() {
        l[(i, i)] = l[(i, i)].exp();
    }
    Ok(l)
}

/// `S^β` through the eigendecomposition.
pub fn spd_pow(s: &SpdMatrix, beta: f64) -> Result<SpdMatrix> {
    let eig = sym_eig(s.as_sym())?;
    Ok(SpdMatrix::from_sym_unchecked(eig.map(|v| v.powf(beta))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::random::{random_base_vector, random_spd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn rel(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    #[test]
    fn mln_trivial_cases() {
        assert_eq!(mln(&SpdMatrix::identity(3)).unwrap(), SymMatrix::zeros(3));
        let x = mln(&SpdMatrix::from_diagonal(&[E * E, E]).unwrap()).unwrap();
        assert!((x.as_matrix() - SymMatrix::from_diagonal(&[2.0, 1.0]).as_matrix()).norm() < 1e-15);
    }

    #[test]
    fn mexp_trivial_cases() {
        assert_eq!(mexp(&SymMatrix::zeros(2)).unwrap(), SpdMatrix::identity(2));
        let s = mexp(&SymMatrix::from_diagonal(&[1.0, 2.0])).unwrap();
        assert!((s.as_matrix()[(0, 0)] - E).abs() < 1e-15);
        assert!((s.as_matrix()[(1, 1)] - E * E).abs() < 1e-14);
    }

    #[test]
    fn mexp_overflow() {
        assert!(matches!(mexp(&SymMatrix::from_diagonal(&[701.0, 0.0])), Err(Error::Overflow(_))));
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = random_spd(&mut rng, 4, 1e3);
            let back = mexp(&mln(&s).unwrap()).unwrap();
            assert!(rel(back.as_matrix(), s.as_matrix()) < 1e-9);
            let back = cln_inv(&cln(&s).unwrap()).unwrap();
            assert!(rel(back.as_matrix(), s.as_matrix()) < 1e-9);
            let alpha = random_base_vector(&mut rng, 4);
            let back = mgexp(&mlog(&s, &alpha).unwrap(), &alpha).unwrap();
            assert!(rel(back.as_matrix(), s.as_matrix()) < 1e-9);
        }
    }

    #[test]
    fn cln_trivial_cases() {
        assert_eq!(cln(&SpdMatrix::identity(3)).unwrap(), LowerTriangular::zeros(3));
        let x = cln(&SpdMatrix::from_diagonal(&[E * E]).unwrap()).unwrap();
        assert!((x.as_matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(cln_inv(&LowerTriangular::zeros(2)).unwrap(), SpdMatrix::identity(2));
        let one = LowerTriangular::new(Matrix::from_element(1, 1, 1.0)).unwrap();
        assert!((cln_inv(&one).unwrap().as_matrix()[(0, 0)] - E * E).abs() < 1e-14);
    }

    #[test]
    fn mlog_trivial_cases() {
        let alpha = BaseVector::from_alpha(&[2.0, 7.0, 0.3]).unwrap();
        assert_eq!(mlog(&SpdMatrix::identity(3), &alpha).unwrap(), SymMatrix::zeros(3));

        let alpha = BaseVector::from_alpha(&[2.0, 3.0]).unwrap();
        let x = mlog(&SpdMatrix::from_diagonal(&[4.0, 27.0]).unwrap(), &alpha).unwrap();
        assert!((x.as_matrix() - SymMatrix::from_diagonal(&[2.0, 3.0]).as_matrix()).norm() < 1e-14);

        let s = mgexp(&SymMatrix::from_diagonal(&[2.0, 3.0]), &alpha).unwrap();
        assert!((s.as_matrix() - SymMatrix::from_diagonal(&[4.0, 27.0]).as_matrix()).norm() < 1e-12);
        assert_eq!(mgexp(&SymMatrix::zeros(2), &alpha).unwrap(), SpdMatrix::identity(2));
    }

    #[test]
    fn natural_base_reproduces_mln_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = BaseVector::natural(4);
        for _ in 0..10 {
            let s = random_spd(&mut rng, 4, 1e2);
            assert_eq!(mlog(&s, &e).unwrap(), mln(&s).unwrap());
            let x = mln(&s).unwrap();
            assert_eq!(mgexp(&x, &e).unwrap(), mexp(&x).unwrap());
        }
    }

    #[test]
    fn three_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let s = random_spd(&mut rng, 5, 1e3);
            let alpha = random_base_vector(&mut rng, 5);
            let f = alpha.factors();
            let direct = mlog(&s, &alpha).unwrap();
            let mul = mlog_multiplier_form(&s, &f.multiplier).unwrap();
            let div = mlog_divisor_form(&s, &f.divisor).unwrap();
            assert!((direct.as_matrix() - mul.as_matrix()).norm() <= 1e-13 * direct.norm().max(1.0));
            assert!((direct.as_matrix() - div.as_matrix()).norm() <= 1e-13 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let alpha = BaseVector::natural(3);
        assert!(matches!(
            mlog(&SpdMatrix::identity(2), &alpha),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
