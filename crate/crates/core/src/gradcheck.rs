//! Finite-difference self-check of every analytic differential and
//! backward pass in the crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{
    alog_backward, alog_forward, bimap_backward, bimap_forward, loewner, reeig_backward, reeig_forward,
    ScalarFunctionSpec, REEIG_EPS,
};
use crate::differentials::{
    d_cln, d_mgexp, d_mgexp_series, d_mlog, fd_differential, relative_error, DEFAULT_FD_STEP,
};
use crate::error::Result;
use crate::spd::eig::sym_eig;
use crate::spd::random::{gaussian_matrix, random_base_vector, random_row_orthonormal, random_spd, random_sym};
use crate::spd::{cln, mgexp, mlog, BaseVector, Matrix, SpdMatrix, SymMatrix};
use crate::spdnet::{backward, forward, init_network, loss_softmax_ce, AlogMode, NetworkConfig, TrainState};

/// Deliberate mistakes used to confirm that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negates the divided-difference kernel in the eigenvalue-function
    /// backward pass.
    FlipKernelSign,
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            dims: vec![3, 4, 6],
            trials: 5,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub dim: usize,
    pub max_rel_error: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.threshold
    }
}

pub const DIFFERENTIAL_TOL: f64 = 1e-5;
pub const SERIES_TOL: f64 = 1e-8;
pub const NETWORK_TOL: f64 = 1e-4;

/// Numerical gradient of a scalar function on symmetric matrices, one
/// central difference per entry of the upper triangle.
pub fn fd_sym_gradient<F>(f: F, s: &Matrix, step: f64) -> Result<Matrix>
where
    F: Fn(&Matrix) -> Result<f64>,
{
    let n = s.nrows();
    let mut grad = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut e = Matrix::zeros(n, n);
            e[(i, j)] = 0.5;
            e[(j, i)] = 0.5;
            if i == j {
                e[(i, i)] = 1.0;
            }
            let d = (f(&(s + &e * step))? - f(&(s - &e * step))?) / (2.0 * step);
            grad[(i, j)] = d;
            grad[(j, i)] = d;
        }
    }
    Ok(grad)
}

/// Numerical gradient with respect to every entry of a general matrix.
pub fn fd_matrix_gradient<F>(f: F, w: &Matrix, step: f64) -> Result<Matrix>
where
    F: Fn(&Matrix) -> Result<f64>,
{
    let mut grad = Matrix::zeros(w.nrows(), w.ncols());
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let mut p = w.clone();
            p[(i, j)] += step;
            let mut m = w.clone();
            m[(i, j)] -= step;
            grad[(i, j)] = (f(&p)? - f(&m)?) / (2.0 * step);
        }
    }
    Ok(grad)
}

fn unchecked(m: &Matrix) -> SpdMatrix {
    SpdMatrix::from_sym_unchecked(SymMatrix::symmetrize(m))
}

fn probe(g: &SymMatrix, x: &SymMatrix) -> f64 {
    g.dot(x)
}

struct Tracker {
    results: Vec<CheckResult>,
}

impl Tracker {
    fn record(&mut self, name: &str, dim: usize, threshold: f64, err: f64) {
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if let Some(r) = self.results.iter_mut().find(|r| r.name == name && r.dim == dim) {
            r.max_rel_error = r.max_rel_error.max(err);
        } else {
            self.results.push(CheckResult {
                name: name.to_string(),
                dim,
                max_rel_error: err,
                threshold,
            });
        }
    }
}

fn weighted_log_backward(s: &SpdMatrix, alpha: &BaseVector, g: &SymMatrix, fault: Option<Fault>) -> Result<SymMatrix> {
    let eig = sym_eig(s.as_sym())?;
    let weights: Vec<f64> = alpha.paired_log_bases(&eig)?.iter().map(|b| 1.0 / b).collect();
    let mut k = loewner(eig.sigma().as_slice(), &ScalarFunctionSpec::WeightedLog(weights))?.k;
    if fault == Some(Fault::FlipKernelSign) {
        k = -k;
    }
    let inner = eig.to_eigenbasis(g.as_matrix());
    Ok(SymMatrix::symmetrize(&eig.from_eigenbasis(&k.component_mul(&inner))))
}

fn network_gradient_error(state: &TrainState, s: &SpdMatrix, label: usize) -> Result<f64> {
    let (logits, cache) = forward(state, s)?;
    let (_, g) = loss_softmax_ce(&logits, label)?;
    let analytic = backward(state, &cache, &g)?.flatten();
    let params = state.parameters();
    let mut probe_state = state.clone();
    let mut numeric = vec![0.0; params.len()];
    let h = DEFAULT_FD_STEP;
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] += h;
        probe_state.set_parameters(&p)?;
        let lp = loss_softmax_ce(&forward(&probe_state, s)?.0, label)?.0;
        p[k] -= 2.0 * h;
        probe_state.set_parameters(&p)?;
        let lm = loss_softmax_ce(&forward(&probe_state, s)?.0, label)?.0;
        numeric[k] = (lp - lm) / (2.0 * h);
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(diff / norm.max(1.0))
}

/// A network with perturbed ALog parameters, so the head is not the plain
/// logarithm.
pub fn perturbed_network(dims: &[usize], mode: AlogMode, seed: u64) -> Result<TrainState> {
    let cfg = NetworkConfig {
        dims: dims.to_vec(),
        alog_mode: Some(mode),
        ..Default::default()
    };
    let mut state = init_network(&cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let jitter = gaussian_matrix(&mut rng, state.alog.len(), 1);
    for (a, j) in state.alog.iter_mut().zip(jitter.iter()) {
        *a *= 1.0 + 0.2 * j.tanh();
    }
    state.bias = gaussian_matrix(&mut rng, state.bias.len(), 1).column(0).into_owned() * 0.1;
    Ok(state)
}

pub fn run_suite(opts: &GradCheckOptions) -> Result<Vec<CheckResult>> {
    let mut t = Tracker { results: Vec::new() };
    let h = DEFAULT_FD_STEP;
    for &n in &opts.dims {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(n as u64));
        for _ in 0..opts.trials {
            let s = random_spd(&mut rng, n, 20.0);
            let v = random_sym(&mut rng, n, 1.0);
            let g = random_sym(&mut rng, n, 1.0);
            let alpha = random_base_vector(&mut rng, n);

            let a = d_mlog(&s, &v, &alpha)?;
            let num = fd_differential(|m| Ok(mlog(&unchecked(m), &alpha)?.into_matrix()), s.as_matrix(), v.as_matrix(), h)?;
            t.record("d_mlog", n, DIFFERENTIAL_TOL, relative_error(a.as_matrix(), &num));

            let x = mlog(&s, &alpha)?;
            let a = d_mgexp(&x, &v, &alpha)?;
            let num = fd_differential(
                |m| Ok(mgexp(&SymMatrix::symmetrize(m), &alpha)?.as_matrix().clone()),
                x.as_matrix(),
                v.as_matrix(),
                h,
            )?;
            t.record("d_mgexp", n, DIFFERENTIAL_TOL, relative_error(a.as_matrix(), &num));

            let a = d_cln(&s, &v)?;
            let num = fd_differential(|m| Ok(cln(&unchecked(m))?.into_matrix()), s.as_matrix(), v.as_matrix(), h)?;
            t.record("d_cln", n, DIFFERENTIAL_TOL, relative_error(a.as_matrix(), &num));

            let xs = random_sym(&mut rng, n, 0.3);
            let closed = d_mgexp(&xs, &v, &alpha)?;
            let series = d_mgexp_series(&xs, &v, &alpha, 30)?;
            t.record("d_mgexp_series", n, SERIES_TOL, relative_error(closed.as_matrix(), &series));

            let a = weighted_log_backward(&s, &alpha, &g, opts.fault)?;
            let num = fd_sym_gradient(|m| Ok(probe(&g, &mlog(&unchecked(m), &alpha)?)), s.as_matrix(), h)?;
            t.record("eig_fn_backward", n, DIFFERENTIAL_TOL, relative_error(a.as_matrix(), &num));

            let mult: Vec<f64> = alpha.factors().multiplier;
            let (_, eig) = alog_forward(&s, &mult)?;
            let (gs, ga) = alog_backward(&eig, &mult, &g)?;
            let num = fd_sym_gradient(|m| Ok(probe(&g, &alog_forward(&unchecked(m), &mult)?.0)), s.as_matrix(), h)?;
            t.record("alog_backward_S", n, DIFFERENTIAL_TOL, relative_error(gs.as_matrix(), &num));
            let num: Vec<f64> = (0..n)
                .map(|i| {
                    let mut p = mult.clone();
                    p[i] += h;
                    let mut m = mult.clone();
                    m[i] -= h;
                    Ok((probe(&g, &alog_forward(&s, &p)?.0) - probe(&g, &alog_forward(&s, &m)?.0)) / (2.0 * h))
                })
                .collect::<Result<_>>()?;
            let an = Matrix::from_column_slice(n, 1, &ga);
            let nu = Matrix::from_column_slice(n, 1, &num);
            t.record("alog_backward_A", n, DIFFERENTIAL_TOL, relative_error(&an, &nu));

            let d_out = n.div_ceil(2);
            let w = random_row_orthonormal(&mut rng, d_out, n);
            let go = random_sym(&mut rng, d_out, 1.0);
            let (gw, gs) = bimap_backward(&w, &s, go.as_matrix());
            let num = fd_sym_gradient(|m| Ok(probe(&go, bimap_forward(&w, &unchecked(m))?.as_sym())), s.as_matrix(), h)?;
            t.record("bimap_backward_S", n, DIFFERENTIAL_TOL, relative_error(gs.as_matrix(), &num));
            let num = fd_matrix_gradient(
                |wm| Ok(probe(&go, &s.as_sym().congruence(wm))),
                &w,
                h,
            )?;
            t.record("bimap_backward_W", n, DIFFERENTIAL_TOL, relative_error(&gw, &num));

            let (_, eig) = reeig_forward(&s, REEIG_EPS)?;
            let a = reeig_backward(&eig, REEIG_EPS, &g)?;
            let num = fd_sym_gradient(|m| Ok(probe(&g, reeig_forward(&unchecked(m), REEIG_EPS)?.0.as_sym())), s.as_matrix(), h)?;
            t.record("reeig_backward", n, DIFFERENTIAL_TOL, relative_error(a.as_matrix(), &num));
        }
    }

    let nets: [(&[usize], AlogMode); 4] = [
        (&[6, 3], AlogMode::Mul),
        (&[6, 4, 3], AlogMode::Div),
        (&[6, 4, 3], AlogMode::Relu),
        (&[6, 4, 3], AlogMode::Geom),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xa11);
    for (dims, mode) in nets {
        let name = format!("network_{}_{}", mode.name(), dims.iter().map(usize::to_string).collect::<Vec<_>>().join("-"));
        for trial in 0..opts.trials.min(3) {
            let state = perturbed_network(dims, mode, opts.seed.wrapping_add(trial as u64))?;
            let s = random_spd(&mut rng, dims[0], 20.0);
            let err = network_gradient_error(&state, &s, trial % 3)?;
            t.record(&name, dims[0], NETWORK_TOL, err);
        }
    }
    Ok(t.results)
}

pub fn format_table(results: &[CheckResult]) -> String {
    let mut out = format!("{:<22} {:>4} {:>12} {:>10}  status\n", "check", "dim", "max_rel_err", "threshold");
    for r in results {
        out.push_str(&format!(
            "{:<22} {:>4} {:>12.3e} {:>10.0e}  {}\n",
            r.name,
            r.dim,
            r.max_rel_error,
            r.threshold,
            if r.passed() { "pass" } else { "FAIL" }
        ));
    }
    out
}
