//! Differentials of the generalized matrix logarithm and exponential, the
//! Cholesky logarithm and its inverse, the series form of `d mgexp`, and a
//! central finite-difference oracle.
//!
//! `d mlog` and `d mgexp` are computed in the eigenbasis,
//! `U·(K ⊙ UᵀVU)·Uᵀ`, where `K` holds the divided differences of the
//! per-eigenvalue scalar functions. For distinct eigenvalues this is the same
//! map as `Q + Qᵀ + W` built from the eigenvector differentials `D_U`; that
//! form is kept in [`d_mlog_eigvec_form`] / [`d_mgexp_eigvec_form`]. Unlike the
//! pseudo-inverse form, the kernel form stays exact inside repeated
//! eigenvalue clusters whose bases agree.

use crate::error::{Error, Result};
use crate::spd::eig::{cholesky, sym_eig, EigenDecomposition};
use crate::spd::functions::cholesky_from_log_chart;
use crate::spd::{BaseVector, LowerTriangular, Matrix, SpdMatrix, SymMatrix};

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Eigenvalue gap below which closed-form eigenvector differentials are
/// considered ill-conditioned.
pub fn eig_gap_tol(sigma_max: f64) -> f64 {
    1e-8 * sigma_max.abs().max(1.0)
}

/// Reciprocal threshold for the Moore–Penrose inverse of `σᵢI − S`.
pub fn pseudo_tol(sigma_max: f64) -> f64 {
    1e-10 * sigma_max.abs()
}

fn sigma_max_abs(eig: &EigenDecomposition) -> f64 {
    eig.sigma().iter().fold(0.0_f64, |m, s| m.max(s.abs()))
}

/// Divided-difference kernel for per-index scalar functions.
///
/// `values[i] = fᵢ(σᵢ)`, `derivs[i] = fᵢ'(σᵢ)`; `same_fn(i, j)` says whether
/// `fᵢ` and `fⱼ` coincide. Near-degenerate pairs with the same function fall
/// back to the derivative; with different functions the derivative does not
/// exist and `on_degenerate` decides.
pub(crate) fn divided_differences(
    sigma: &[f64],
    values: &[f64],
    derivs: &[f64],
    tol: f64,
    same_fn: impl Fn(usize, usize) -> bool,
    mut on_degenerate: impl FnMut(usize, usize, f64) -> Result<f64>,
) -> Result<Matrix> {
    let n = sigma.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = derivs[i];
        for j in i + 1..n {
            let gap = sigma[i] - sigma[j];
            let v = if gap.abs() > tol {
                (values[i] - values[j]) / gap
            } else if same_fn(i, j) {
                0.5 * (derivs[i] + derivs[j])
            } else {
                on_degenerate(i, j, gap.abs())?
            };
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

fn apply_kernel(eig: &EigenDecomposition, k: &Matrix, v: &SymMatrix) -> SymMatrix {
    let vhat = eig.to_eigenbasis(v.as_matrix());
    SymMatrix::symmetrize(&eig.from_eigenbasis(&k.component_mul(&vhat)))
}

fn degenerate_error(tol: f64) -> impl FnMut(usize, usize, f64) -> Result<f64> {
    move |_, _, gap| Err(Error::DegenerateSpectrum { gap, tol })
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

/// `d mlog` at `S` applied to `V`.
pub fn d_mlog(s: &SpdMatrix, v: &SymMatrix, alpha: &BaseVector) -> Result<SymMatrix> {
    check_same_dim(s.dim(), v.dim())?;
    let eig = sym_eig(s.as_sym())?;
    d_mlog_from_eig(&eig, v, alpha)
}

pub fn d_mlog_from_eig(eig: &EigenDecomposition, v: &SymMatrix, alpha: &BaseVector) -> Result<SymMatrix> {
    let b = alpha.paired_log_bases(eig)?;
    let sigma = eig.sigma().as_slice();
    let values: Vec<f64> = sigma.iter().zip(&b).map(|(s, b)| s.ln() / b).collect();
    let derivs: Vec<f64> = sigma.iter().zip(&b).map(|(s, b)| 1.0 / (s * b)).collect();
    let tol = eig_gap_tol(sigma_max_abs(eig));
    let k = divided_differences(sigma, &values, &derivs, tol, |i, j| b[i] == b[j], degenerate_error(tol))?;
    Ok(apply_kernel(eig, &k, v))
}

/// `d mgexp` at `X` applied to `V`.
pub fn d_mgexp(x: &SymMatrix, v: &SymMatrix, alpha: &BaseVector) -> Result<SymMatrix> {
    check_same_dim(x.dim(), v.dim())?;
    let eig = sym_eig(x)?;
    d_mgexp_from_eig(&eig, v, alpha)
}

pub fn d_mgexp_from_eig(eig: &EigenDecomposition, v: &SymMatrix, alpha: &BaseVector) -> Result<SymMatrix> {
    let b = alpha.paired_log_bases(eig)?;
    let sigma = eig.sigma().as_slice();
    let values: Vec<f64> = sigma.iter().zip(&b).map(|(x, b)| (b * x).exp()).collect();
    let derivs: Vec<f64> = values.iter().zip(&b).map(|(g, b)| b * g).collect();
    let tol = eig_gap_tol(sigma_max_abs(eig));
    let k = divided_differences(sigma, &values, &derivs, tol, |i, j| b[i] == b[j], degenerate_error(tol))?;
    Ok(apply_kernel(eig, &k, v))
}

/// Eigenvector differentials `D_U = ((σ₁I − S)⁺Vu₁ … (σₙI − S)⁺Vuₙ)`.
#[derive(Debug, Clone)]
pub struct EigDifferentialWorkspace {
    /// Column `i` is the derivative of `uᵢ` in direction `V`.
    pub d_u: Matrix,
    /// `UᵀVU`; its diagonal holds the eigenvalue differentials `uᵢᵀVuᵢ`.
    pub v_hat: Matrix,
    pub pseudo_tol: f64,
}

impl EigDifferentialWorkspace {
    pub fn new(eig: &EigenDecomposition, v: &SymMatrix) -> Self {
        let sigma = eig.sigma();
        let n = eig.dim();
        let tol = pseudo_tol(sigma_max_abs(eig));
        let v_hat = eig.to_eigenbasis(v.as_matrix());
        // (σᵢI − S)⁺ V uᵢ = Σₖ uₖ (uₖᵀVuᵢ)/(σᵢ − σₖ) over k with σₖ ≠ σᵢ.
        let mut coeff = Matrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                let gap = sigma[i] - sigma[k];
                if k != i && gap.abs() > tol {
                    coeff[(k, i)] = v_hat[(k, i)] / gap;
                }
            }
        }
        Self {
            d_u: eig.u() * coeff,
            v_hat,
            pseudo_tol: tol,
        }
    }
}

fn eigvec_form(eig: &EigenDecomposition, v: &SymMatrix, values: &[f64], derivs: &[f64]) -> SymMatrix {
    let ws = EigDifferentialWorkspace::new(eig, v);
    let u = eig.u();
    let f = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(values));
    let q = &ws.d_u * f * u.transpose();
    let w_diag: Vec<f64> = (0..eig.dim()).map(|i| ws.v_hat[(i, i)] * derivs[i]).collect();
    let w = eig.assemble(&w_diag);
    SymMatrix::symmetrize(&(&q + q.transpose() + w.as_matrix()))
}

/// `Q + Qᵀ + W` with `Q = D_U·log(Σ)·Uᵀ` and
/// `W = U·diag(uᵢᵀVuᵢ / (σᵢ ln aᵢ))·Uᵀ`. Valid for distinct eigenvalues.
pub fn d_mlog_eigvec_form(s: &SpdMatrix, v: &SymMatrix, alpha: &BaseVector) -> Result<SymMatrix> {
    let eig = sym_eig(s.as_sym())?;
    let b = alpha.paired_log_bases(&eig)?;
    let sigma = eig.sigma().as_slice();
    let values: Vec<f64> = sigma.iter().zip(&b).map(|(s, b)| s.ln() / b).collect();
    let derivs: Vec<f64> = sigma.iter().zip(&b).map(|(s, b)| 1.0 / (s * b)).collect();
    Ok(eigvec_form(&eig, v, &values, &derivs))
}

/// `Q̃ + Q̃ᵀ + W̃` with `Q̃ = D_Ũ·α(Σ̃)·Ũᵀ` and
/// `W̃ = Ũ·diag(ln aᵢ · aᵢ^σ̃ᵢ · ũᵢᵀṼũᵢ)·Ũᵀ`.
pub fn d_mgexp_eigvec_form(x: &SymMatrix, v: &SymMatrix, alpha: &BaseVector) -> Result<SymMatrix> {
    let eig = sym_eig(x)?;
    let b = alpha.paired_log_bases(&eig)?;
    let sigma = eig.sigma().as_slice();
    let values: Vec<f64> = sigma.iter().zip(&b).map(|(x, b)| (b * x).exp()).collect();
    let derivs: Vec<f64> = values.iter().zip(&b).map(|(g, b)| b * g).collect();
    Ok(eigvec_form(&eig, v, &values, &derivs))
}

/// Partial sum with `terms` summands of
/// `Σₖ 1/k! Σₗ (P̃X)^{k−l−1} (D_P̃·X + P̃·Ṽ) (P̃X)^l`, where `P̃ = Ũ·B·Ũᵀ`
/// and `D_P̃ = D_Ũ·B·Ũᵀ + Ũ·B·D_Ũᵀ`.
///
/// Returns the raw partial sum; it becomes symmetric as `terms` grows.
pub fn d_mgexp_series(x: &SymMatrix, v: &SymMatrix, alpha: &BaseVector, terms: usize) -> Result<Matrix> {
    if terms == 0 {
        return Err(Error::InvalidParameter("series needs at least one term".into()));
    }
    check_same_dim(x.dim(), v.dim())?;
    let eig = sym_eig(x)?;
    let b = alpha.paired_log_bases(&eig)?;
    let ws = EigDifferentialWorkspace::new(&eig, v);
    let n = eig.dim();
    let u = eig.u();
    let bmat = Matrix::from_diagonal(&nalgebra::DVector::from_vec(b.clone()));
    let p = eig.assemble(&b).into_matrix();
    let d_p = &ws.d_u * &bmat * u.transpose() + u * &bmat * ws.d_u.transpose();
    let m = &p * x.as_matrix();
    let e = &d_p * x.as_matrix() + &p * v.as_matrix();

    // T₁ = E, T_{k+1} = M·T_k + E·M^k.
    let mut t = e.clone();
    let mut m_pow = m.clone();
    let mut total = e.clone();
    let mut inv_fact = 1.0;
    for k in 2..=terms {
        t = &m * &t + &e * &m_pow;
        m_pow = &m_pow * &m;
        inv_fact /= k as f64;
        total += &t * inv_fact;
    }
    debug_assert_eq!(total.nrows(), n);
    Ok(total)
}

/// `(f(S + hV) − f(S − hV)) / 2h`.
pub fn fd_differential<F>(f: F, s: &Matrix, v: &Matrix, step: f64) -> Result<Matrix>
where
    F: Fn(&Matrix) -> Result<Matrix>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    let plus = f(&(s + v * step))?;
    let minus = f(&(s - v * step))?;
    Ok((plus - minus) / (2.0 * step))
}

/// `‖a − b‖_F / max(1, ‖a‖_F)`.
pub fn relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    (analytic - numeric).norm() / analytic.norm().max(1.0)
}

fn half_strict(y: &Matrix) -> Matrix {
    // X_{1/2} = ⌊X⌋ + 𝔻(X)/2
    let mut h = y.lower_triangle();
    for i in 0..h.nrows() {
        h[(i, i)] *= 0.5;
    }
    h
}

/// Differential of the Cholesky logarithm: the Cholesky differential
/// `L·(L⁻¹VL⁻ᵀ)_{1/2}` followed by the chart differential
/// `⌊·⌋ + 𝔻(L)⁻¹𝔻(·)`.
pub fn d_cln(s: &SpdMatrix, v: &SymMatrix) -> Result<LowerTriangular> {
    check_same_dim(s.dim(), v.dim())?;
    let l = cholesky(s)?.into_matrix();
    let n = l.nrows();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&Matrix::identity(n, n))
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let y = &l_inv * v.as_matrix() * l_inv.transpose();
    let l_dot = &l * half_strict(&y);
    let mut out = l_dot.lower_triangle();
    for i in 0..n {
        out[(i, i)] = l_dot[(i, i)] / l[(i, i)];
    }
    LowerTriangular::new(out)
}

/// Differential of `cln⁻¹` at chart point `X` in direction `Ẋ`:
/// `L̇ = ⌊Ẋ⌋ + exp(𝔻X)·𝔻(Ẋ)`, `Ṡ = L̇Lᵀ + LL̇ᵀ`.
pub fn d_cln_inv(x: &LowerTriangular, x_dot: &LowerTriangular) -> Result<SymMatrix> {
    check_same_dim(x.dim(), x_dot.dim())?;
    let l = cholesky_from_log_chart(x)?;
    let mut l_dot = x_dot.as_matrix().clone();
    for i in 0..l_dot.nrows() {
        l_dot[(i, i)] *= l[(i, i)];
    }
    Ok(SymMatrix::symmetrize(&(&l_dot * l.transpose() + &l * l_dot.transpose())))
}
