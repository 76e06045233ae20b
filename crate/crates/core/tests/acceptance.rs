//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion outside `KNOWN_UNATTAINABLE` fails.

mod common;

use std::f64::consts::E;
use std::time::Instant;

use alem::autodiff::{alog_backward, alog_forward, geom_equals_div_check};
use alem::data::{generate_synthetic, train_test_split, SyntheticSpec};
use alem::differentials::{d_cln, d_mgexp, d_mgexp_series, d_mlog};
use alem::geometry::{
    check_bi_invariance, check_exponential_invariance, check_similarity_invariance, Alem, Lcm, Lem,
    PullbackGeometry, PullbackMetric, TangentVector,
};
use alem::spd::random::{random_base_vector, random_rotation, random_spd, random_sym};
use alem::spd::{cln, cln_inv, mexp, mgexp, mln, mlog, BaseVector, Matrix, SpdMatrix, SymMatrix};
use alem::spdnet::{
    epoch_batches, evaluate, fit, init_network, metrics_csv, train_step,
    AlogMode, NetworkConfig, Parallelism,
};
use common::*;
use rand::Rng;

/// Criteria whose failure is expected and explained in the project notes.
const KNOWN_UNATTAINABLE: &[&str] = &["6c"];

struct Line {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, name: &'static str, pass: bool, detail: String) -> Line {
    Line { id, name, pass, detail }
}

fn c1_round_trips() -> Line {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut r = rng(1);
    for n in [2, 5, 10, 50] {
        for _ in 0..1000 {
            let s = random_spd(&mut r, n, 1e3);
            let m = s.as_matrix();
            worst = worst.max(rel(mexp(&mln(&s).unwrap()).unwrap().as_matrix(), m));
            let alpha = random_base_vector(&mut r, n);
            worst = worst.max(rel(mgexp(&mlog(&s, &alpha).unwrap(), &alpha).unwrap().as_matrix(), m));
            worst = worst.max(rel(cln_inv(&cln(&s).unwrap()).unwrap().as_matrix(), m));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "1",
        "round trips mexp∘mln, mgexp∘mlog, cln_inv∘cln",
        worst <= 1e-9 && secs < 30.0,
        format!("max rel err {worst:.2e} (tol 1e-9), {secs:.1}s (limit 30s)"),
    )
}

fn c2_specialization() -> Line {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(2..6);
        let alem = Alem::new(BaseVector::from_alpha(&vec![E; n]).unwrap());
        let s1 = random_spd(&mut r, n, 50.0);
        let s2 = random_spd(&mut r, n, 50.0);
        let s3 = random_spd(&mut r, n, 50.0);
        let v = TangentVector::new(s1.clone(), random_sym(&mut r, n, 0.5)).unwrap();

        let d = alem.distance(&s1, &s2).unwrap();
        worst = worst.max((d - Lem.distance(&s1, &s2).unwrap()).abs());
        worst = worst.max((d - oracle_lem_distance(&s1, &s2)).abs() / d.max(1.0));

        let e_a = alem.rie_exp(&v).unwrap();
        worst = worst.max(rel(e_a.as_matrix(), Lem.rie_exp(&v).unwrap().as_matrix()));
        let l_a = alem.rie_log(&s1, &s2).unwrap();
        worst = worst.max(rel(l_a.value.as_matrix(), Lem.rie_log(&s1, &s2).unwrap().value.as_matrix()));
        let t_a = alem.parallel_transport(&v, &s2).unwrap();
        worst = worst.max(rel(t_a.value.as_matrix(), Lem.parallel_transport(&v, &s2).unwrap().value.as_matrix()));

        let pts = [s1.clone(), s2.clone(), s3.clone()];
        let w = [0.2, 1.0, 2.5];
        let m_a = alem.weighted_frechet_mean(&pts, &w).unwrap();
        worst = worst.max(rel(m_a.as_matrix(), Lem.weighted_frechet_mean(&pts, &w).unwrap().as_matrix()));
        let mut acc = Matrix::zeros(n, n);
        for (p, wi) in pts.iter().zip(&w) {
            acc += oracle_mln(p.as_matrix()) * (wi / 3.7);
        }
        worst = worst.max(rel(m_a.as_matrix(), &oracle_mexp(&acc)));
    }
    line(
        "2",
        "ALEM with α=e equals LEM (distance, exp, log, transport, mean)",
        worst <= 1e-12,
        format!("max err {worst:.2e} (tol 1e-12)"),
    )
}

fn c3_isometry() -> Line {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = r.random_range(2..8);
        let a = random_spd(&mut r, n, 100.0);
        let b = random_spd(&mut r, n, 100.0);
        let d = Lem.distance(&a, &b).unwrap();
        worst = worst.max((d - oracle_lem_distance(&a, &b)).abs() / d.max(1.0));
        let d = Lcm.distance(&a, &b).unwrap();
        worst = worst.max((d - oracle_lcm_distance(&a, &b)).abs() / d.max(1.0));
    }
    line(
        "3",
        "LEM and LCM distances equal their closed forms",
        worst <= 1e-12,
        format!("max rel err {worst:.2e} (tol 1e-12)"),
    )
}

fn c4_differentials() -> Line {
    let h = 1e-6;
    let mut worst_fd: f64 = 0.0;
    let mut worst_series: f64 = 0.0;
    for seed in 0..20 {
        let mut r = rng(400 + seed);
        for n in [3, 4, 6] {
            let s = random_spd(&mut r, n, 20.0);
            let v = random_sym(&mut r, n, 1.0);
            let alpha = random_base_vector(&mut r, n);
            let f = |m: &Matrix| mlog(&SpdMatrix::new(SymMatrix::from_matrix(m).unwrap()).unwrap(), &alpha).unwrap().into_matrix();
            let a = d_mlog(&s, &v, &alpha).unwrap();
            worst_fd = worst_fd.max(rel(&central_diff(&f, s.as_matrix(), v.as_matrix(), h), a.as_matrix()));

            let x = mlog(&s, &alpha).unwrap();
            let g = |m: &Matrix| mgexp(&SymMatrix::from_matrix(m).unwrap(), &alpha).unwrap().as_matrix().clone();
            let a = d_mgexp(&x, &v, &alpha).unwrap();
            worst_fd = worst_fd.max(rel(&central_diff(&g, x.as_matrix(), v.as_matrix(), h), a.as_matrix()));

            let c = |m: &Matrix| cln(&SpdMatrix::new(SymMatrix::from_matrix(m).unwrap()).unwrap()).unwrap().into_matrix();
            let a = d_cln(&s, &v).unwrap();
            worst_fd = worst_fd.max(rel(&central_diff(&c, s.as_matrix(), v.as_matrix(), h), a.as_matrix()));

            // Scale X so that ‖P̃X‖_F ≤ 5.
            let xs = random_sym(&mut r, n, 1.0);
            let max_b = alpha.log_bases().iter().fold(0.0_f64, |m, b| m.max(b.abs()));
            let xs = xs.scale(4.0 / (xs.norm() * max_b));
            let closed = d_mgexp(&xs, &v, &alpha).unwrap();
            let series = d_mgexp_series(&xs, &v, &alpha, 30).unwrap();
            worst_series = worst_series.max(rel(&series, closed.as_matrix()));
        }
    }
    line(
        "4",
        "d_mlog, d_mgexp, d_cln vs finite differences; series at K=30",
        worst_fd <= 1e-5 && worst_series <= 1e-8,
        format!("FD max rel {worst_fd:.2e} (tol 1e-5), series max rel {worst_series:.2e} (tol 1e-8)"),
    )
}

fn probe(g: &SymMatrix, x: &SymMatrix) -> f64 {
    g.dot(x)
}

fn sym_basis_grad(f: &dyn Fn(&Matrix) -> f64, s: &Matrix, h: f64) -> Matrix {
    let n = s.nrows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut e = Matrix::zeros(n, n);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = 0.5;
                e[(j, i)] = 0.5;
            }
            let d = (f(&(s + &e * h)) - f(&(s - &e * h))) / (2.0 * h);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

fn c5_gradients() -> Line {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut r = rng(5);
    for _ in 0..10 {
        let n = 3;
        let s = random_spd(&mut r, n, 20.0);
        let g = random_sym(&mut r, n, 1.0);
        let mult: Vec<f64> = (0..n).map(|_| r.random_range(0.4..2.0)).collect();
        let (_, eig) = alog_forward(&s, &mult).unwrap();
        let (gs, ga) = alog_backward(&eig, &mult, &g).unwrap();
        let f = |m: &Matrix| probe(&g, &alog_forward(&SpdMatrix::new(SymMatrix::from_matrix(m).unwrap()).unwrap(), &mult).unwrap().0);
        worst = worst.max(rel(&sym_basis_grad(&f, s.as_matrix(), h), gs.as_matrix()));
        let num: Vec<f64> = (0..n)
            .map(|i| {
                let mut p = mult.clone();
                p[i] += h;
                let mut q = mult.clone();
                q[i] -= h;
                (probe(&g, &alog_forward(&s, &p).unwrap().0) - probe(&g, &alog_forward(&s, &q).unwrap().0)) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel(&Matrix::from_column_slice(n, 1, &num), &Matrix::from_column_slice(n, 1, &ga)));
    }
    let nets: [(&[usize], AlogMode); 5] = [
        (&[6, 3], AlogMode::Mul),
        (&[6, 4, 3], AlogMode::Mul),
        (&[6, 4, 3], AlogMode::Div),
        (&[6, 4, 3], AlogMode::Relu),
        (&[6, 4, 3], AlogMode::Geom),
    ];
    for (k, (dims, mode)) in nets.iter().enumerate() {
        let cfg = NetworkConfig {
            dims: dims.to_vec(),
            alog_mode: Some(*mode),
            ..Default::default()
        };
        let mut state = init_network(&cfg, 50 + k as u64).unwrap();
        for a in state.alog.iter_mut() {
            *a *= r.random_range(0.8..1.25);
        }
        for trial in 0..3 {
            let s = random_spd(&mut r, dims[0], 20.0);
            worst = worst.max(network_fd_error(&state, &s, trial));
        }
    }
    line(
        "5",
        "ALog ∇S/∇A and network gradients on {6,3}, {6,4,3} vs finite differences",
        worst <= 1e-4,
        format!("max rel err {worst:.2e} (tol 1e-4)"),
    )
}

fn c6_invariance() -> Vec<Line> {
    let mut r = rng(6);
    let mut bi: f64 = 0.0;
    let mut ex: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(2..6);
        let alpha = base_vector_in(&mut r, n, 0.5, 2.0);
        let pts: Vec<SpdMatrix> = (0..3).map(|_| spd_log_uniform(&mut r, n, 1.0)).collect();
        for metric in [PullbackMetric::Lem, PullbackMetric::Lcm, PullbackMetric::Alem(alpha.clone())] {
            bi = bi.max(check_bi_invariance(&metric, &pts[0], &pts[1], &pts[2]).unwrap());
        }
        for beta in [-1.0, 0.5, 2.5] {
            ex = ex.max(check_exponential_invariance(&pts, beta, &alpha).unwrap());
        }
    }
    let mut sim: f64 = 0.0;
    let mut sim_const: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(2..6);
        let alpha = base_vector_in(&mut r, n, 0.5, 2.0);
        let constant = BaseVector::constant(n, r.random_range(1.5..8.0)).unwrap();
        let s1 = spd_log_uniform(&mut r, n, 1.0);
        let s2 = spd_log_uniform(&mut r, n, 1.0);
        let rot = random_rotation(&mut r, n);
        for s in [0.1, 1.0, 7.0] {
            sim = sim.max(check_similarity_invariance(&s1, &s2, &rot, s, &alpha).unwrap());
            sim_const = sim_const.max(check_similarity_invariance(&s1, &s2, &rot, s, &constant).unwrap());
        }
    }
    vec![
        line("6a", "bi-invariance (LEM, LCM, ALEM)", bi <= 1e-10, format!("max residual {bi:.2e} (tol 1e-10)")),
        line(
            "6b",
            "exponential invariance, β ∈ {-1, 0.5, 2.5}",
            ex <= 1e-8,
            format!("max residual {ex:.2e} (tol 1e-8)"),
        ),
        line(
            "6c",
            "similarity invariance, random non-constant α, s ∈ {0.1, 1, 7}",
            sim <= 1e-9,
            format!("max residual {sim:.2e} (tol 1e-9)"),
        ),
        line(
            "6d",
            "similarity invariance, constant α, s ∈ {0.1, 1, 7}",
            sim_const <= 1e-9,
            format!("max residual {sim_const:.2e} (tol 1e-9)"),
        ),
    ]
}

fn c7_frechet() -> Line {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        for _ in 0..3 {
            let pts: Vec<SpdMatrix> = (0..5).map(|_| spd_log_uniform(&mut r, n, 1.0)).collect();
            let w: Vec<f64> = (0..5).map(|_| r.random_range(0.5..2.0)).collect();
            let alpha = base_vector_in(&mut r, n, 0.5, 2.0);
            for metric in [PullbackMetric::Lem, PullbackMetric::Lcm, PullbackMetric::Alem(alpha.clone())] {
                let closed = metric.weighted_frechet_mean(&pts, &w).unwrap();
                let numeric = frechet_oracle(&metric, &pts, &w);
                let e = rel(numeric.as_matrix(), closed.as_matrix());
                worst = worst.max(e);
            }
        }
    }
    line(
        "7",
        "closed-form weighted Fréchet mean equals numerical minimizer",
        worst <= 1e-5,
        format!("max rel err {worst:.2e} (tol 1e-5)"),
    )
}

fn c8_geom_div() -> Line {
    let mut r = rng(8);
    let mut isolated: f64 = geom_equals_div_check(E, 0.1, &[1.0; 100]).unwrap();
    for _ in 0..100 {
        let grads: Vec<f64> = (0..100).map(|_| r.random_range(-2.0..2.0)).collect();
        let a0 = r.random_range(0.2..10.0);
        isolated = isolated.max(geom_equals_div_check(a0, 0.05, &grads).unwrap());
    }

    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let (train, _) = train_test_split(&data, 0.5, 0).unwrap();
    let par = Parallelism::serial();
    let mk = |mode| {
        init_network(
            &NetworkConfig {
                alog_mode: Some(mode),
                ..Default::default()
            },
            0,
        )
        .unwrap()
    };
    let mut div = mk(AlogMode::Div);
    let mut geom = mk(AlogMode::Geom);
    let mut network: f64 = 0.0;
    for _ in 0..100 {
        let bd = epoch_batches(&mut div, train.len());
        let bg = epoch_batches(&mut geom, train.len());
        assert_eq!(bd, bg);
        for batch in &bd {
            train_step(&mut div, &train, batch, &par).unwrap();
            train_step(&mut geom, &train, batch, &par).unwrap();
            for (b, a) in div.alog.iter().zip(&geom.alog) {
                network = network.max((a.ln() - b).abs());
            }
        }
    }
    line(
        "8",
        "GEOM equals DIV over 100 steps, isolated and in network training",
        isolated <= 1e-8 && network <= 1e-8,
        format!("isolated {isolated:.2e}, network {network:.2e} (tol 1e-8)"),
    )
}

struct TrainingOutcome {
    lines: Vec<Line>,
    violations: usize,
}

fn c9_training() -> TrainingOutcome {
    let start = Instant::now();
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let (train, test) = train_test_split(&data, 0.5, 0).unwrap();
    let par = Parallelism::serial();
    let mut details = Vec::new();
    let mut ok = true;
    let mut violations = 0;
    let modes = [
        Some(AlogMode::Mul),
        Some(AlogMode::Div),
        Some(AlogMode::Relu),
        Some(AlogMode::Geom),
        None,
    ];
    for mode in modes {
        let cfg = NetworkConfig {
            alog_mode: mode,
            ..Default::default()
        };
        let mut state = init_network(&cfg, 0).unwrap();
        let report = fit(&mut state, &train, Some(&test), &par, false, |_| {}).unwrap();
        violations += report.spd_violations;
        let tr = evaluate(&state, &train, &par).unwrap().accuracy;
        let te = evaluate(&state, &test, &par).unwrap().accuracy;
        let pass = match mode {
            Some(_) => tr >= 0.95 && te >= 0.85,
            None => te >= 0.80,
        };
        ok &= pass;
        details.push(format!("{} train {tr:.3} test {te:.3}", mode.map_or("logeig", AlogMode::name)));
    }
    let secs = start.elapsed().as_secs_f64();
    let lines = vec![line(
        "9",
        "desk-scale training on synthetic {10,5}, 100 epochs",
        ok && secs < 120.0,
        format!("{}; {secs:.1}s (limit 120s)", details.join(", ")),
    )];
    TrainingOutcome { lines, violations }
}

fn run_csv(mode: Option<AlogMode>, threads: usize) -> String {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let (train, test) = train_test_split(&data, 0.5, 0).unwrap();
    let par = Parallelism::new(threads).unwrap();
    let cfg = NetworkConfig {
        alog_mode: mode,
        ..Default::default()
    };
    let mut state = init_network(&cfg, 0).unwrap();
    let report = fit(&mut state, &train, Some(&test), &par, false, |_| {}).unwrap();
    metrics_csv(&report.rows)
}

fn c11_determinism() -> Line {
    let mut ok = true;
    let mut checked = 0;
    for mode in [Some(AlogMode::Mul), Some(AlogMode::Div), Some(AlogMode::Relu), Some(AlogMode::Geom), None] {
        let a = run_csv(mode, 1);
        let b = run_csv(mode, 1);
        let c = run_csv(mode, 4);
        ok &= a == b && a == c;
        checked += 3;
    }
    line(
        "11",
        "byte-identical metrics CSV on rerun and with 4 threads",
        ok,
        format!("{checked} runs compared"),
    )
}

fn main() {
    let mut lines = vec![c1_round_trips(), c2_specialization(), c3_isometry(), c4_differentials(), c5_gradients()];
    lines.extend(c6_invariance());
    lines.push(c7_frechet());
    lines.push(c8_geom_div());
    let training = c9_training();
    lines.extend(training.lines);
    lines.push(line(
        "10",
        "no SPD violations at any layer boundary during criterion 9",
        training.violations == 0,
        format!("{} violations", training.violations),
    ));
    lines.push(c11_determinism());

    let mut unexpected = 0;
    for l in &lines {
        let known = KNOWN_UNATTAINABLE.contains(&l.id);
        let status = if l.pass { "PASS" } else { "FAIL" };
        let note = if !l.pass && known { " [known unattainable]" } else { "" };
        println!("criterion {:<3} {status} {}: {}{note}", l.id, l.name, l.detail);
        if !l.pass && !known {
            unexpected += 1;
        }
    }
    println!(
        "{} criteria, {} passed, {} failed",
        lines.len(),
        lines.iter().filter(|l| l.pass).count(),
        lines.iter().filter(|l| !l.pass).count()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
