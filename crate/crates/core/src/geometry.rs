//! Geometry pulled back from a flat image space through a diffeomorphism of
//! the SPD manifold.
//!
//! Any [`Diffeomorphism`] `φ` onto a Euclidean space induces a Lie group, a
//! Hilbert space, and a Riemannian metric on SPD matrices. All operations in
//! [`PullbackGeometry`] are written once against `φ`, `φ⁻¹` and their
//! differentials; [`Lem`], [`Lcm`] and [`Alem`] supply the maps.

use crate::differentials::{d_cln, d_cln_inv, d_mgexp, d_mlog};
use crate::error::{Error, Result};
use crate::spd::{
    cln, cln_inv, mgexp, mlog, spd_pow, BaseVector, LowerTriangular, Matrix, SpdMatrix, SymMatrix, Vector,
};

/// Side length `n` of a matrix whose half-vectorization has `len` entries.
pub fn dim_from_half_len(len: usize) -> Result<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize - 1) / 2;
    if n * (n + 1) / 2 != len {
        return Err(Error::InvalidInput(format!("{len} is not a triangular number")));
    }
    Ok(n)
}

/// Lower triangle row by row, off-diagonal entries scaled by `√2` so that
/// Euclidean and Frobenius inner products agree.
pub fn half_vec(x: &SymMatrix) -> Vector {
    let n = x.dim();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let v = x.get(i, j);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    Vector::from_vec(out)
}

pub fn half_vec_inv(v: &Vector) -> Result<SymMatrix> {
    let n = dim_from_half_len(v.len())?;
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            let x = if i == j { v[k] } else { v[k] / std::f64::consts::SQRT_2 };
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    Ok(SymMatrix::symmetrize(&m))
}

/// Lower triangle row by row without rescaling.
pub fn lower_vec(x: &LowerTriangular) -> Vector {
    let n = x.dim();
    let m = x.as_matrix();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    Vector::from_vec(out)
}

pub fn lower_vec_inv(v: &Vector) -> Result<LowerTriangular> {
    let n = dim_from_half_len(v.len())?;
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            m[(i, j)] = v[k];
            k += 1;
        }
    }
    LowerTriangular::new(m)
}

/// A diffeomorphism from SPD matrices onto a flat space of dimension
/// `n(n+1)/2`, together with its differentials.
pub trait Diffeomorphism {
    fn forward(&self, s: &SpdMatrix) -> Result<Vector>;
    fn inverse(&self, x: &Vector) -> Result<SpdMatrix>;
    /// `φ_{*,S}(V)`.
    fn d_forward(&self, s: &SpdMatrix, v: &SymMatrix) -> Result<Vector>;
    /// `(φ⁻¹)_{*,X}(Ẋ)` at image point `X`.
    fn d_inverse(&self, x: &Vector, x_dot: &Vector) -> Result<SymMatrix>;
}

/// Log-Euclidean metric, `φ = mln`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Lem;

/// Log-Cholesky metric, `φ = cln`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Lcm;

/// Adaptive log-Euclidean metric, `φ = mlog` with base vector `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alem {
    pub alpha: BaseVector,
}

impl Alem {
    pub fn new(alpha: BaseVector) -> Self {
        Self { alpha }
    }
}

fn log_euclidean_forward(s: &SpdMatrix, alpha: &BaseVector) -> Result<Vector> {
    Ok(half_vec(&mlog(s, alpha)?))
}

fn log_euclidean_inverse(x: &Vector, alpha: &BaseVector) -> Result<SpdMatrix> {
    mgexp(&half_vec_inv(x)?, alpha)
}

fn log_euclidean_d_forward(s: &SpdMatrix, v: &SymMatrix, alpha: &BaseVector) -> Result<Vector> {
    Ok(half_vec(&d_mlog(s, v, alpha)?))
}

fn log_euclidean_d_inverse(x: &Vector, x_dot: &Vector, alpha: &BaseVector) -> Result<SymMatrix> {
    d_mgexp(&half_vec_inv(x)?, &half_vec_inv(x_dot)?, alpha)
}

impl Diffeomorphism for Lem {
    fn forward(&self, s: &SpdMatrix) -> Result<Vector> {
        log_euclidean_forward(s, &BaseVector::natural(s.dim()))
    }
    fn inverse(&self, x: &Vector) -> Result<SpdMatrix> {
        log_euclidean_inverse(x, &BaseVector::natural(dim_from_half_len(x.len())?))
    }
    fn d_forward(&self, s: &SpdMatrix, v: &SymMatrix) -> Result<Vector> {
        log_euclidean_d_forward(s, v, &BaseVector::natural(s.dim()))
    }
    fn d_inverse(&self, x: &Vector, x_dot: &Vector) -> Result<SymMatrix> {
        log_euclidean_d_inverse(x, x_dot, &BaseVector::natural(dim_from_half_len(x.len())?))
    }
}

impl Diffeomorphism for Alem {
    fn forward(&self, s: &SpdMatrix) -> Result<Vector> {
        log_euclidean_forward(s, &self.alpha)
    }
    fn inverse(&self, x: &Vector) -> Result<SpdMatrix> {
        log_euclidean_inverse(x, &self.alpha)
    }
    fn d_forward(&self, s: &SpdMatrix, v: &SymMatrix) -> Result<Vector> {
        log_euclidean_d_forward(s, v, &self.alpha)
    }
    fn d_inverse(&self, x: &Vector, x_dot: &Vector) -> Result<SymMatrix> {
        log_euclidean_d_inverse(x, x_dot, &self.alpha)
    }
}

impl Diffeomorphism for Lcm {
    fn forward(&self, s: &SpdMatrix) -> Result<Vector> {
        Ok(lower_vec(&cln(s)?))
    }
    fn inverse(&self, x: &Vector) -> Result<SpdMatrix> {
        cln_inv(&lower_vec_inv(x)?)
    }
    fn d_forward(&self, s: &SpdMatrix, v: &SymMatrix) -> Result<Vector> {
        Ok(lower_vec(&d_cln(s, v)?))
    }
    fn d_inverse(&self, x: &Vector, x_dot: &Vector) -> Result<SymMatrix> {
        d_cln_inv(&lower_vec_inv(x)?, &lower_vec_inv(x_dot)?)
    }
}

/// One of the three supported pullback metrics.
#[derive(Debug, Clone, PartialEq)]
pub enum PullbackMetric {
    Lem,
    Lcm,
    Alem(BaseVector),
}

impl PullbackMetric {
    pub fn name(&self) -> &'static str {
        match self {
            PullbackMetric::Lem => "LEM",
            PullbackMetric::Lcm => "LCM",
            PullbackMetric::Alem(_) => "ALEM",
        }
    }
}

impl Diffeomorphism for PullbackMetric {
    fn forward(&self, s: &SpdMatrix) -> Result<Vector> {
        match self {
            PullbackMetric::Lem => Lem.forward(s),
            PullbackMetric::Lcm => Lcm.forward(s),
            PullbackMetric::Alem(a) => log_euclidean_forward(s, a),
        }
    }
    fn inverse(&self, x: &Vector) -> Result<SpdMatrix> {
        match self {
            PullbackMetric::Lem => Lem.inverse(x),
            PullbackMetric::Lcm => Lcm.inverse(x),
            PullbackMetric::Alem(a) => log_euclidean_inverse(x, a),
        }
    }
    fn d_forward(&self, s: &SpdMatrix, v: &SymMatrix) -> Result<Vector> {
        match self {
            PullbackMetric::Lem => Lem.d_forward(s, v),
            PullbackMetric::Lcm => Lcm.d_forward(s, v),
            PullbackMetric::Alem(a) => log_euclidean_d_forward(s, v, a),
        }
    }
    fn d_inverse(&self, x: &Vector, x_dot: &Vector) -> Result<SymMatrix> {
        match self {
            PullbackMetric::Lem => Lem.d_inverse(x, x_dot),
            PullbackMetric::Lcm => Lcm.d_inverse(x, x_dot),
            PullbackMetric::Alem(a) => log_euclidean_d_inverse(x, x_dot, a),
        }
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: SpdMatrix,
    pub value: SymMatrix,
}

impl TangentVector {
    pub fn new(base: SpdMatrix, value: SymMatrix) -> Result<Self> {
        if base.dim() != value.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                got: value.dim(),
            });
        }
        Ok(Self { base, value })
    }

    pub fn zero(base: SpdMatrix) -> Self {
        let n = base.dim();
        Self {
            base,
            value: SymMatrix::zeros(n),
        }
    }
}

fn same_dim(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Operations induced by a diffeomorphism.
pub trait PullbackGeometry: Diffeomorphism {
    /// `φ⁻¹(0)`.
    fn identity_element(&self, n: usize) -> Result<SpdMatrix> {
        self.inverse(&Vector::zeros(n * (n + 1) / 2))
    }

    /// `S₁ ⊙ S₂ = φ⁻¹(φ(S₁) + φ(S₂))`.
    fn group_mul(&self, s1: &SpdMatrix, s2: &SpdMatrix) -> Result<SpdMatrix> {
        same_dim(s1, s2)?;
        self.inverse(&(self.forward(s1)? + self.forward(s2)?))
    }

    /// `φ⁻¹(−φ(S))`.
    fn group_inverse(&self, s: &SpdMatrix) -> Result<SpdMatrix> {
        self.inverse(&-self.forward(s)?)
    }

    /// `S₁ ⊘ S₂ = φ⁻¹(φ(S₁) − φ(S₂))`.
    fn group_difference(&self, s1: &SpdMatrix, s2: &SpdMatrix) -> Result<SpdMatrix> {
        same_dim(s1, s2)?;
        self.inverse(&(self.forward(s1)? - self.forward(s2)?))
    }

    /// `k ⊛ S = φ⁻¹(k·φ(S))`.
    fn scalar_mul(&self, k: f64, s: &SpdMatrix) -> Result<SpdMatrix> {
        self.inverse(&(self.forward(s)? * k))
    }

    /// `⟨S₁, S₂⟩_φ = ⟨φ(S₁), φ(S₂)⟩`.
    fn inner_product(&self, s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64> {
        same_dim(s1, s2)?;
        Ok(self.forward(s1)?.dot(&self.forward(s2)?))
    }

    /// `‖φ(S₁) − φ(S₂)‖`.
    fn distance(&self, s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64> {
        same_dim(s1, s2)?;
        Ok((self.forward(s1)? - self.forward(s2)?).norm())
    }

    /// Riemannian metric `g_S(V, W) = ⟨φ_{*,S}V, φ_{*,S}W⟩`.
    fn metric_tensor(&self, s: &SpdMatrix, v: &SymMatrix, w: &SymMatrix) -> Result<f64> {
        Ok(self.d_forward(s, v)?.dot(&self.d_forward(s, w)?))
    }

    /// `φ⁻¹(φ(S) + φ_{*,S}V)`.
    fn rie_exp(&self, v: &TangentVector) -> Result<SpdMatrix> {
        let x = self.forward(&v.base)?;
        let dx = self.d_forward(&v.base, &v.value)?;
        self.inverse(&(x + dx))
    }

    /// `(φ⁻¹)_{*,φ(S₁)}(φ(S₂) − φ(S₁))`.
    fn rie_log(&self, s1: &SpdMatrix, s2: &SpdMatrix) -> Result<TangentVector> {
        same_dim(s1, s2)?;
        let x1 = self.forward(s1)?;
        let x2 = self.forward(s2)?;
        let value = self.d_inverse(&x1, &(&x2 - &x1))?;
        Ok(TangentVector {
            base: s1.clone(),
            value,
        })
    }

    /// `(φ⁻¹)_{*,φ(S₂)} ∘ φ_{*,S₁}`.
    fn parallel_transport(&self, v: &TangentVector, target: &SpdMatrix) -> Result<TangentVector> {
        same_dim(&v.base, target)?;
        let dx = self.d_forward(&v.base, &v.value)?;
        let value = self.d_inverse(&self.forward(target)?, &dx)?;
        Ok(TangentVector {
            base: target.clone(),
            value,
        })
    }

    /// `φ⁻¹((1 − t)·φ(S₁) + t·φ(S₂))`.
    fn geodesic(&self, s1: &SpdMatrix, s2: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
        same_dim(s1, s2)?;
        let x1 = self.forward(s1)?;
        let x2 = self.forward(s2)?;
        self.inverse(&(x1 * (1.0 - t) + x2 * t))
    }

    /// `φ⁻¹(Σᵢ wᵢ·φ(Sᵢ) / Σᵢ wᵢ)`.
    fn weighted_frechet_mean(&self, points: &[SpdMatrix], weights: &[f64]) -> Result<SpdMatrix> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("Fréchet mean of an empty set".into()))?;
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidInput(format!("weight {w} must be positive")));
        }
        let total: f64 = weights.iter().sum();
        let n = first.dim();
        let mut acc = Vector::zeros(n * (n + 1) / 2);
        for (p, w) in points.iter().zip(weights) {
            same_dim(first, p)?;
            acc += self.forward(p)? * (w / total);
        }
        self.inverse(&acc)
    }

    fn frechet_mean(&self, points: &[SpdMatrix]) -> Result<SpdMatrix> {
        self.weighted_frechet_mean(points, &vec![1.0; points.len()])
    }
}

impl<T: Diffeomorphism + ?Sized> PullbackGeometry for T {}

/// `|d(S₁ ⊙ P, S₂ ⊙ P) − d(S₁, S₂)|`.
pub fn check_bi_invariance<G: PullbackGeometry + ?Sized>(
    metric: &G,
    s1: &SpdMatrix,
    s2: &SpdMatrix,
    p: &SpdMatrix,
) -> Result<f64> {
    let moved = metric.distance(&metric.group_mul(s1, p)?, &metric.group_mul(s2, p)?)?;
    Ok((moved - metric.distance(s1, s2)?).abs())
}

/// `‖FM(Sᵢ)^β − FM(Sᵢ^β)‖_F` for the unweighted ALEM Fréchet mean.
pub fn check_exponential_invariance(points: &[SpdMatrix], beta: f64, alpha: &BaseVector) -> Result<f64> {
    let metric = Alem::new(alpha.clone());
    let lhs = spd_pow(&metric.frechet_mean(points)?, beta)?;
    let powered: Vec<SpdMatrix> = points.iter().map(|p| spd_pow(p, beta)).collect::<Result<_>>()?;
    let rhs = metric.frechet_mean(&powered)?;
    Ok((lhs.as_matrix() - rhs.as_matrix()).norm())
}

/// `|d(S₁, S₂) − d(s²RS₁Rᵀ, s²RS₂Rᵀ)|` under ALEM.
pub fn check_similarity_invariance(
    s1: &SpdMatrix,
    s2: &SpdMatrix,
    rotation: &Matrix,
    scale: f64,
    alpha: &BaseVector,
) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale {scale} must be positive")));
    }
    let metric = Alem::new(alpha.clone());
    let map = |s: &SpdMatrix| SpdMatrix::new(s.as_sym().congruence(rotation).scale(scale * scale));
    let moved = metric.distance(&map(s1)?, &map(s2)?)?;
    Ok((moved - metric.distance(s1, s2)?).abs())
}
