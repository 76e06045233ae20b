//! Hand-written backward passes for the structured matrix layers of an SPD
//! network, and the manifold-aware parameter updates.

use crate::differentials::divided_differences;
use crate::error::{Error, Result};
use crate::spd::eig::{sym_eig, EigenDecomposition};
use crate::spd::{axis_assignment, mexp, spd_pow, Matrix, SpdMatrix, SymMatrix};

/// Lower bound of the RELU base parameter.
pub const RELU_EPS: f64 = 0.01;
/// Clamp threshold of ReEig.
pub const REEIG_EPS: f64 = 1e-4;
/// Largest exponent magnitude taken by the positive-scalar RSGD step.
pub const RSGD_EXPONENT_CLAMP: f64 = 50.0;

pub fn dd_tol(sigma_max: f64) -> f64 {
    1e-10 * sigma_max.abs().max(1.0)
}

/// Scalar function applied to the eigenvalues, possibly with a different
/// weight per eigen-index.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFunctionSpec {
    /// `fᵢ(σ) = wᵢ·ln σ`.
    WeightedLog(Vec<f64>),
    /// `f(σ) = max(σ, ε)`.
    ReEigClamp(f64),
    Identity,
}

impl ScalarFunctionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarFunctionSpec::WeightedLog(_) => "weighted-log",
            ScalarFunctionSpec::ReEigClamp(_) => "reeig-clamp",
            ScalarFunctionSpec::Identity => "identity",
        }
    }

    pub fn natural_log(n: usize) -> Self {
        ScalarFunctionSpec::WeightedLog(vec![1.0; n])
    }

    pub fn f(&self, i: usize, sigma: f64) -> f64 {
        match self {
            ScalarFunctionSpec::WeightedLog(w) => w[i] * sigma.ln(),
            ScalarFunctionSpec::ReEigClamp(eps) => sigma.max(*eps),
            ScalarFunctionSpec::Identity => sigma,
        }
    }

    pub fn f_prime(&self, i: usize, sigma: f64) -> f64 {
        match self {
            ScalarFunctionSpec::WeightedLog(w) => w[i] / sigma,
            ScalarFunctionSpec::ReEigClamp(eps) => {
                if sigma > *eps {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarFunctionSpec::Identity => 1.0,
        }
    }

    fn same(&self, i: usize, j: usize) -> bool {
        match self {
            ScalarFunctionSpec::WeightedLog(w) => w[i] == w[j],
            _ => true,
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        match self {
            ScalarFunctionSpec::WeightedLog(w) if w.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// Divided differences `K` of a scalar function over a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct LoewnerMatrix {
    pub k: Matrix,
}

/// `K_ij = (fᵢ(σᵢ) − fⱼ(σⱼ))/(σᵢ − σⱼ)` for well separated pairs, `f′`
/// otherwise.
pub fn loewner(sigma: &[f64], spec: &ScalarFunctionSpec) -> Result<LoewnerMatrix> {
    spec.check_len(sigma.len())?;
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite eigenvalue".into()));
    }
    let values: Vec<f64> = sigma.iter().enumerate().map(|(i, s)| spec.f(i, *s)).collect();
    let derivs: Vec<f64> = sigma.iter().enumerate().map(|(i, s)| spec.f_prime(i, *s)).collect();
    let sigma_max = sigma.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let k = divided_differences(
        sigma,
        &values,
        &derivs,
        dd_tol(sigma_max),
        |i, j| spec.same(i, j),
        |i, j, _| Ok(0.5 * (derivs[i] + derivs[j])),
    )?;
    Ok(LoewnerMatrix { k })
}

/// `∇_S L = U·[K ⊙ (Uᵀ·∇_X L·U)]·Uᵀ` for `X = U·f(Σ)·Uᵀ`.
pub fn eig_fn_backward(eig: &EigenDecomposition, spec: &ScalarFunctionSpec, grad_out: &SymMatrix) -> Result<SymMatrix> {
    let k = loewner(eig.sigma().as_slice(), spec)?;
    let inner = eig.to_eigenbasis(grad_out.as_matrix());
    Ok(SymMatrix::symmetrize(&eig.from_eigenbasis(&k.k.component_mul(&inner))))
}

/// Forward pass of the adaptive log layer, `X = U·A·ln(Σ)·Uᵀ`, with `A`
/// indexed by coordinate axis and paired to eigenvectors by
/// [`axis_assignment`].
pub fn alog_forward(s: &SpdMatrix, multiplier: &[f64]) -> Result<(SymMatrix, EigenDecomposition)> {
    if multiplier.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: multiplier.len(),
        });
    }
    let eig = sym_eig(s.as_sym())?;
    let axis = axis_assignment(eig.u());
    let d: Vec<f64> = eig
        .sigma()
        .iter()
        .zip(&axis)
        .map(|(s, &a)| multiplier[a] * s.ln())
        .collect();
    Ok((eig.assemble(&d), eig))
}

/// Gradients of the adaptive log layer with respect to its input and to the
/// axis-indexed multiplier `A`:
/// `∇_S` from the per-index kernel of `fᵢ(σ) = A_{π(i)}·ln σ`, and
/// `∇_A[π(i)] = (Uᵀ·∇_X L·U)ᵢᵢ·ln σᵢ`.
pub fn alog_backward(eig: &EigenDecomposition, multiplier: &[f64], grad_out: &SymMatrix) -> Result<(SymMatrix, Vec<f64>)> {
    let n = eig.dim();
    if multiplier.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: multiplier.len(),
        });
    }
    let axis = axis_assignment(eig.u());
    let weights: Vec<f64> = axis.iter().map(|&a| multiplier[a]).collect();
    let spec = ScalarFunctionSpec::WeightedLog(weights);
    let k = loewner(eig.sigma().as_slice(), &spec)?;
    let inner = eig.to_eigenbasis(grad_out.as_matrix());
    let grad_s = SymMatrix::symmetrize(&eig.from_eigenbasis(&k.k.component_mul(&inner)));
    let mut grad_a = vec![0.0; n];
    for (i, &a) in axis.iter().enumerate() {
        grad_a[a] = inner[(i, i)] * eig.sigma()[i].ln();
    }
    Ok((grad_s, grad_a))
}

/// Effective RELU base `max(ε, a)`, moved to `1 + 1e-4` when `|ln a|` falls
/// below the base guard. Returns the base and `d base / d a`.
pub fn relu_effective_base(a_raw: f64) -> (f64, f64) {
    let (mut a, mut da) = if a_raw > RELU_EPS { (a_raw, 1.0) } else { (RELU_EPS, 0.0) };
    if a.ln().abs() < crate::spd::BASE_GUARD {
        a = 1.0 + crate::spd::BASE_GUARD;
        da = 0.0;
    }
    (a, da)
}

/// Checks that `W` has full row rank.
pub fn check_bimap_weight(w: &Matrix) -> Result<()> {
    if w.nrows() > w.ncols() {
        return Err(Error::InvalidParameter(format!(
            "BiMap weight is {}x{}; output dimension exceeds input dimension",
            w.nrows(),
            w.ncols()
        )));
    }
    let gram = SymMatrix::symmetrize(&(w * w.transpose()));
    let min = sym_eig(&gram)?.sigma().iter().fold(f64::INFINITY, |m, s| m.min(*s));
    if !(min > 1e-10) {
        return Err(Error::InvalidParameter("BiMap weight is rank deficient".into()));
    }
    Ok(())
}

/// `W·S·Wᵀ`.
pub fn bimap_forward(w: &Matrix, s: &SpdMatrix) -> Result<SpdMatrix> {
    if w.ncols() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.ncols(),
            got: s.dim(),
        });
    }
    check_bimap_weight(w)?;
    Ok(bimap_unchecked(w, s))
}

pub(crate) fn bimap_unchecked(w: &Matrix, s: &SpdMatrix) -> SpdMatrix {
    SpdMatrix::from_sym_unchecked(s.as_sym().congruence(w))
}

/// Returns `(∇_W, ∇_S) = (2·G·W·S, Wᵀ·G·W)` with `G` the symmetrized upstream
/// gradient.
pub fn bimap_backward(w: &Matrix, s: &SpdMatrix, grad_out: &Matrix) -> (Matrix, SymMatrix) {
    let g = SymMatrix::symmetrize(grad_out);
    let grad_w = g.as_matrix() * w * s.as_matrix() * 2.0;
    let grad_s = g.congruence(&w.transpose());
    (grad_w, grad_s)
}

/// One Riemannian SGD step on the row-orthonormal Stiefel manifold with a QR
/// retraction.
pub fn stiefel_update(w: &Matrix, grad_w: &Matrix, lr: f64) -> Matrix {
    let riem = grad_w - w * grad_w.transpose() * w;
    let moved = (w - riem * lr).transpose();
    let qr = moved.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            let flipped = -q.column(j);
            q.set_column(j, &flipped);
        }
    }
    q.transpose()
}

/// `max(σ, ε)` on the eigenvalues.
pub fn reeig_forward(s: &SpdMatrix, eps: f64) -> Result<(SpdMatrix, EigenDecomposition)> {
    let eig = sym_eig(s.as_sym())?;
    let out = SpdMatrix::from_sym_unchecked(eig.map(|v| v.max(eps)));
    Ok((out, eig))
}

pub fn reeig_backward(eig: &EigenDecomposition, eps: f64, grad_out: &SymMatrix) -> Result<SymMatrix> {
    eig_fn_backward(eig, &ScalarFunctionSpec::ReEigClamp(eps), grad_out)
}

/// `a·exp(−lr·a·∇_a)`.
pub fn rsgd_positive_scalar(a: f64, grad_a: f64, lr: f64) -> f64 {
    let mut exponent = -lr * a * grad_a;
    if exponent.abs() > RSGD_EXPONENT_CLAMP {
        log::warn!("RSGD exponent {exponent:.3e} clamped to ±{RSGD_EXPONENT_CLAMP}");
        exponent = exponent.clamp(-RSGD_EXPONENT_CLAMP, RSGD_EXPONENT_CLAMP);
    }
    a * exponent.exp()
}

/// Riemannian SGD step under the affine-invariant metric: project with
/// `π_S(X) = S·sym(X)·S`, then move along `S^{1/2}·mexp(S^{−1/2}VS^{−1/2})·S^{1/2}`.
pub fn spd_rsgd_step(s: &SpdMatrix, euclid_grad: &Matrix, lr: f64) -> Result<SpdMatrix> {
    let g = SymMatrix::symmetrize(euclid_grad);
    let v = g.congruence(s.as_matrix()).scale(-lr);
    let half = spd_pow(s, 0.5)?;
    let inv_half = spd_pow(s, -0.5)?;
    let inner = mexp(&v.congruence(inv_half.as_matrix()))?;
    SpdMatrix::new(inner.as_sym().congruence(half.as_matrix()))
}

/// Runs the geometric update on `a` and plain SGD on `b = ln a` side by
/// side. `grads_b[t]` is the loss gradient with respect to `b` at step `t`;
/// the `a` trajectory receives it through the chain rule `∇_a = ∇_b / a`.
/// Returns `maxₜ |ln a⁽ᵗ⁾ − b⁽ᵗ⁾|`.
pub fn geom_equals_div_check(a0: f64, lr: f64, grads_b: &[f64]) -> Result<f64> {
    if !(a0 > 0.0) {
        return Err(Error::InvalidParameter(format!("a0 = {a0} must be positive")));
    }
    let mut a = a0;
    let mut b = a0.ln();
    let mut worst = 0.0_f64;
    for &g in grads_b {
        a = rsgd_positive_scalar(a, g / a, lr);
        b -= lr * g;
        worst = worst.max((a.ln() - b).abs());
    }
    Ok(worst)
}
