#![allow(dead_code)]

use alem::geometry::PullbackGeometry;
use alem::spdnet::{backward, forward, loss_softmax_ce, TrainState};
use alem::spd::{BaseVector, Matrix, SpdMatrix, SymMatrix};
use nalgebra::{Cholesky, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Matrix logarithm straight from nalgebra's eigensolver.
pub fn oracle_mln(s: &Matrix) -> Matrix {
    let e = SymmetricEigen::new(s.clone());
    let d = Matrix::from_diagonal(&e.eigenvalues.map(f64::ln));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

pub fn oracle_mexp(x: &Matrix) -> Matrix {
    let e = SymmetricEigen::new(x.clone());
    let d = Matrix::from_diagonal(&e.eigenvalues.map(f64::exp));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

pub fn oracle_lem_distance(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    (oracle_mln(a.as_matrix()) - oracle_mln(b.as_matrix())).norm()
}

/// `‖⌊L₁⌋ − ⌊L₂⌋‖² + ‖ln 𝔻(L₁) − ln 𝔻(L₂)‖²` with nalgebra's Cholesky.
pub fn oracle_lcm_distance(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    let l1 = Cholesky::new(a.as_matrix().clone()).expect("SPD").l();
    let l2 = Cholesky::new(b.as_matrix().clone()).expect("SPD").l();
    let n = l1.nrows();
    let mut strict = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        for j in 0..i {
            strict += (l1[(i, j)] - l2[(i, j)]).powi(2);
        }
        diag += (l1[(i, i)].ln() - l2[(i, i)].ln()).powi(2);
    }
    (strict + diag).sqrt()
}

/// SPD matrix with log-eigenvalues uniform in `[-half_width, half_width]`.
pub fn spd_log_uniform(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> SpdMatrix {
    let q = alem::spd::random::random_rotation(rng, n);
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-half_width..half_width).exp()).collect();
    let m = &q * Matrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * q.transpose();
    SpdMatrix::new(SymMatrix::from_matrix(&m).unwrap()).unwrap()
}

/// Non-constant base vector with `ln aᵢ ∈ [lo, hi]`.
pub fn base_vector_in(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> BaseVector {
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    BaseVector::from_log_bases(&b).unwrap()
}

pub fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// `(f(S + hV) − f(S − hV)) / 2h`, written independently of the library.
pub fn central_diff(f: &dyn Fn(&Matrix) -> Matrix, s: &Matrix, v: &Matrix, h: f64) -> Matrix {
    (f(&(s + v * h)) - f(&(s - v * h))) / (2.0 * h)
}

fn chart_to_spd(theta: &[f64], n: usize) -> Option<SpdMatrix> {
    let mut l = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = if i == j { theta[k].exp() } else { theta[k] };
            k += 1;
        }
    }
    SpdMatrix::new(SymMatrix::from_matrix(&(&l * l.transpose())).ok()?).ok()
}

fn spd_to_chart(s: &SpdMatrix) -> Vec<f64> {
    let l = Cholesky::new(s.as_matrix().clone()).expect("SPD").l();
    let n = l.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            out.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
        }
    }
    out
}

/// Minimizes `Σ wᵢ d²(S, Sᵢ)` by damped Newton in log-Cholesky coordinates
/// using central differences of the distance only.
///
/// The cost can be discontinuous where the eigenvector pairing changes, so
/// the descent is restarted from the arithmetic mean, the log-Euclidean mean
/// and every sample, and the lowest-cost end point wins.
pub fn frechet_oracle<G: PullbackGeometry + ?Sized>(metric: &G, points: &[SpdMatrix], weights: &[f64]) -> SpdMatrix {
    let n = points[0].dim();
    let total: f64 = weights.iter().sum();
    let mut arith = Matrix::zeros(n, n);
    let mut log_mean = Matrix::zeros(n, n);
    for (p, w) in points.iter().zip(weights) {
        arith += p.as_matrix() * (w / total);
        log_mean += oracle_mln(p.as_matrix()) * (w / total);
    }
    let mut starts = vec![arith, oracle_mexp(&log_mean)];
    starts.extend(points.iter().map(|p| p.as_matrix().clone()));
    let cost = |s: &SpdMatrix| -> f64 {
        points
            .iter()
            .zip(weights)
            .map(|(p, w)| w * metric.distance(s, p).unwrap().powi(2))
            .sum()
    };
    starts
        .iter()
        .map(|m| newton_descent(metric, points, weights, SpdMatrix::new(SymMatrix::from_matrix(m).unwrap()).unwrap()))
        .min_by(|a, b| cost(a).total_cmp(&cost(b)))
        .unwrap()
}

fn newton_descent<G: PullbackGeometry + ?Sized>(
    metric: &G,
    points: &[SpdMatrix],
    weights: &[f64],
    start: SpdMatrix,
) -> SpdMatrix {
    let n = points[0].dim();
    let total: f64 = weights.iter().sum();
    let mut theta = spd_to_chart(&start);
    let m = theta.len();
    let cost = |t: &[f64]| -> f64 {
        match chart_to_spd(t, n) {
            Some(s) => points
                .iter()
                .zip(weights)
                .map(|(p, w)| w * metric.distance(&s, p).unwrap().powi(2))
                .sum(),
            None => f64::INFINITY,
        }
    };
    let grad = |t: &[f64], h: f64| -> Vec<f64> {
        (0..m)
            .map(|k| {
                let mut p = t.to_vec();
                p[k] += h;
                let mut q = t.to_vec();
                q[k] -= h;
                (cost(&p) - cost(&q)) / (2.0 * h)
            })
            .collect()
    };
    for _ in 0..200 {
        let g = grad(&theta, 1e-6);
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < 1e-11 * total {
            break;
        }
        let mut hess = Matrix::zeros(m, m);
        let h = 1e-4;
        for k in 0..m {
            let mut p = theta.clone();
            p[k] += h;
            let mut q = theta.clone();
            q[k] -= h;
            let gp = grad(&p, 1e-6);
            let gq = grad(&q, 1e-6);
            for r in 0..m {
                hess[(r, k)] = (gp[r] - gq[r]) / (2.0 * h);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let gv = nalgebra::DVector::from_vec(g.clone());
        let mut lambda = 0.0;
        let f0 = cost(&theta);
        let mut moved = false;
        for _ in 0..40 {
            let damped = &hess + Matrix::identity(m, m) * lambda;
            let step = damped.clone().lu().solve(&gv).filter(|s| s.dot(&gv) > 0.0);
            if let Some(step) = step {
                let mut t = 1.0;
                for _ in 0..30 {
                    let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
                    if cost(&cand) <= f0 - 1e-4 * t * step.dot(&gv) {
                        theta = cand;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if moved {
                break;
            }
            lambda = if lambda == 0.0 { 1e-6 * total } else { lambda * 10.0 };
        }
        if !moved {
            break;
        }
    }
    chart_to_spd(&theta, n).unwrap()
}

/// Relative error between the analytic parameter gradient of the loss and
/// central differences over every flattened parameter.
pub fn network_fd_error(state: &TrainState, s: &SpdMatrix, label: usize) -> f64 {
    let (logits, cache) = forward(state, s).unwrap();
    let (_, g) = loss_softmax_ce(&logits, label).unwrap();
    let analytic = backward(state, &cache, &g).unwrap().flatten();
    let params = state.parameters();
    let mut probe = state.clone();
    let h = 1e-6;
    let mut diff = 0.0;
    let mut norm = 0.0;
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] += h;
        probe.set_parameters(&p).unwrap();
        let lp = loss_softmax_ce(&forward(&probe, s).unwrap().0, label).unwrap().0;
        p[k] -= 2.0 * h;
        probe.set_parameters(&p).unwrap();
        let lm = loss_softmax_ce(&forward(&probe, s).unwrap().0, label).unwrap().0;
        let num = (lp - lm) / (2.0 * h);
        diff += (num - analytic[k]).powi(2);
        norm += analytic[k].powi(2);
    }
    diff.sqrt() / norm.sqrt().max(1.0)
}

/// SPD matrix whose log-eigenvalues lie in `[-half_width, half_width]` and
/// are at least `min_gap` apart.
pub fn spd_separated(rng: &mut ChaCha8Rng, n: usize, half_width: f64, min_gap: f64) -> SpdMatrix {
    let room = 2.0 * half_width - (n as f64 - 1.0) * min_gap;
    assert!(room > 0.0, "no room for {n} eigenvalues");
    let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..room)).collect();
    u.sort_by(f64::total_cmp);
    let q = alem::spd::random::random_rotation(rng, n);
    let d: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, x)| (x - half_width + i as f64 * min_gap).exp())
        .collect();
    let m = &q * Matrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * q.transpose();
    SpdMatrix::new(SymMatrix::from_matrix(&m).unwrap()).unwrap()
}
