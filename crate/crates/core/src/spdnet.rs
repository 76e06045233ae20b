//! A small SPD network: BiMap/ReEig blocks, an adaptive log (or plain
//! LogEig) layer, a full flatten and an affine softmax classifier.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{
    alog_backward, alog_forward, bimap_backward, bimap_unchecked, relu_effective_base, reeig_backward,
    reeig_forward, rsgd_positive_scalar, stiefel_update, REEIG_EPS,
};
use crate::data::SpdDataset;
use crate::error::{Error, Result};
use crate::spd::eig::EigenDecomposition;
use crate::spd::random::{gaussian_matrix, random_row_orthonormal};
use crate::spd::{Matrix, SpdMatrix, SymMatrix, Vector};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SPDN";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,eval_acc,elapsed_s";

/// How the adaptive log layer parameterizes its bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlogMode {
    /// Learns the multiplier `A` directly.
    Mul,
    /// Learns the divisor `B`, multiplier `1/B`.
    Div,
    /// Learns `a` with the clamp `max(ε, a)`, multiplier `1/ln a`.
    Relu,
    /// Learns `a > 0` by Riemannian SGD, multiplier `1/ln a`.
    Geom,
}

impl AlogMode {
    /// Parses `mul|div|relu|geom`; `none` and `logeig` select the plain
    /// LogEig head.
    pub fn parse(s: &str) -> Result<Option<AlogMode>> {
        match s.to_ascii_lowercase().as_str() {
            "mul" => Ok(Some(AlogMode::Mul)),
            "div" => Ok(Some(AlogMode::Div)),
            "relu" => Ok(Some(AlogMode::Relu)),
            "geom" => Ok(Some(AlogMode::Geom)),
            "none" | "logeig" => Ok(None),
            other => Err(Error::Config(format!("unknown ALog mode {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlogMode::Mul => "mul",
            AlogMode::Div => "div",
            AlogMode::Relu => "relu",
            AlogMode::Geom => "geom",
        }
    }

    fn initial_value(self) -> f64 {
        match self {
            AlogMode::Mul | AlogMode::Div => 1.0,
            AlogMode::Relu | AlogMode::Geom => std::f64::consts::E,
        }
    }

    fn code(mode: Option<AlogMode>) -> u8 {
        match mode {
            None => 0,
            Some(AlogMode::Mul) => 1,
            Some(AlogMode::Div) => 2,
            Some(AlogMode::Relu) => 3,
            Some(AlogMode::Geom) => 4,
        }
    }

    fn from_code(code: u8) -> Result<Option<AlogMode>> {
        Ok(match code {
            0 => None,
            1 => Some(AlogMode::Mul),
            2 => Some(AlogMode::Div),
            3 => Some(AlogMode::Relu),
            4 => Some(AlogMode::Geom),
            c => return Err(Error::Parse(format!("unknown ALog mode code {c}"))),
        })
    }

    /// Multiplier `A` and `dA/dθ` for raw parameter `θ`.
    fn multiplier(self, theta: f64) -> (f64, f64) {
        match self {
            AlogMode::Mul => (theta, 1.0),
            AlogMode::Div => (1.0 / theta, -1.0 / (theta * theta)),
            AlogMode::Relu => {
                let (a, da) = relu_effective_base(theta);
                let l = a.ln();
                (1.0 / l, -da / (a * l * l))
            }
            AlogMode::Geom => {
                let l = theta.ln();
                (1.0 / l, -1.0 / (theta * l * l))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    BiMap { d_in: usize, d_out: usize },
    ReEig { eps: f64 },
    Alog(AlogMode),
    LogEig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub dims: Vec<usize>,
    pub alog_mode: Option<AlogMode>,
    pub reeig_eps: f64,
    pub num_classes: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            dims: vec![10, 5],
            alog_mode: Some(AlogMode::Mul),
            reeig_eps: REEIG_EPS,
            num_classes: 3,
            lr: 1e-2,
            batch_size: 30,
            epochs: 100,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::Config("at least two dimensions are needed".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.dims.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config(format!("dimensions {:?} must be non-increasing", self.dims)));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("at least two classes are needed".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be non-negative", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.reeig_eps > 0.0) {
            return Err(Error::Config("ReEig epsilon must be positive".into()));
        }
        Ok(())
    }

    /// BiMap layers with ReEig between them, then the log head.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        let k = self.dims.len() - 1;
        for (i, w) in self.dims.windows(2).enumerate() {
            out.push(LayerSpec::BiMap { d_in: w[0], d_out: w[1] });
            if i + 1 < k {
                out.push(LayerSpec::ReEig { eps: self.reeig_eps });
            }
        }
        out.push(match self.alog_mode {
            Some(m) => LayerSpec::Alog(m),
            None => LayerSpec::LogEig,
        });
        out
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated dims")
    }

    pub fn feature_dim(&self) -> usize {
        self.output_dim() * self.output_dim()
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: NetworkConfig,
    /// `W_k` is `d_{k+1} × d_k` with orthonormal rows.
    pub bimaps: Vec<Matrix>,
    /// Raw ALog parameters indexed by coordinate axis; empty for LogEig.
    pub alog: Vec<f64>,
    pub classifier: Matrix,
    pub bias: Vector,
    pub epoch: usize,
    pub rng: ChaCha8Rng,
}

/// Seeded initialization: Gaussian-QR BiMap weights, ALog parameters that
/// make the layer equal to the matrix logarithm, Gaussian classifier weights
/// scaled by `1/√features` and zero bias.
pub fn init_network(cfg: &NetworkConfig, seed: u64) -> Result<TrainState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bimaps = cfg
        .dims
        .windows(2)
        .map(|w| random_row_orthonormal(&mut rng, w[1], w[0]))
        .collect();
    let features = cfg.feature_dim();
    let classifier = gaussian_matrix(&mut rng, cfg.num_classes, features) * (1.0 / (features as f64).sqrt());
    let alog = match cfg.alog_mode {
        Some(m) => vec![m.initial_value(); cfg.output_dim()],
        None => Vec::new(),
    };
    Ok(TrainState {
        config: cfg.clone(),
        bimaps,
        alog,
        classifier,
        bias: Vector::zeros(cfg.num_classes),
        epoch: 0,
        rng,
    })
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each BiMap layer.
    pub bimap_inputs: Vec<SpdMatrix>,
    /// Eigendecompositions of the ReEig inputs.
    pub reeig_eigs: Vec<EigenDecomposition>,
    /// Eigendecomposition of the log head input.
    pub head_eig: EigenDecomposition,
    pub multiplier: Vec<f64>,
    pub features: Vector,
    /// Smallest eigenvalue at every layer boundary.
    pub boundary_min_eigs: Vec<f64>,
}

impl ForwardCache {
    pub fn spd_violations(&self) -> usize {
        self.boundary_min_eigs.iter().filter(|m| !(**m > 0.0)).count()
    }
}

/// Parameter gradients, laid out like [`TrainState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub bimaps: Vec<Matrix>,
    pub alog: Vec<f64>,
    pub classifier: Matrix,
    pub bias: Vector,
}

impl Gradients {
    pub fn zeros_like(state: &TrainState) -> Self {
        Self {
            bimaps: state.bimaps.iter().map(|w| Matrix::zeros(w.nrows(), w.ncols())).collect(),
            alog: vec![0.0; state.alog.len()],
            classifier: Matrix::zeros(state.classifier.nrows(), state.classifier.ncols()),
            bias: Vector::zeros(state.bias.len()),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.bimaps.iter_mut().zip(&other.bimaps) {
            *a += b;
        }
        for (a, b) in self.alog.iter_mut().zip(&other.alog) {
            *a += b;
        }
        self.classifier += &other.classifier;
        self.bias += &other.bias;
    }

    pub fn scale(&mut self, k: f64) {
        for w in &mut self.bimaps {
            *w *= k;
        }
        for a in &mut self.alog {
            *a *= k;
        }
        self.classifier *= k;
        self.bias *= k;
    }

    /// Same order as [`TrainState::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in &self.bimaps {
            out.extend(row_major(w));
        }
        out.extend_from_slice(&self.alog);
        out.extend(row_major(&self.classifier));
        out.extend(self.bias.iter());
        out
    }
}

fn row_major(m: &Matrix) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

fn fill_row_major(m: &mut Matrix, values: &[f64]) {
    let cols = m.ncols();
    for (k, v) in values.iter().enumerate() {
        m[(k / cols, k % cols)] = *v;
    }
}

impl TrainState {
    /// Effective ALog multiplier, all ones for LogEig.
    pub fn alog_multiplier(&self) -> Vec<f64> {
        match self.config.alog_mode {
            Some(m) => self.alog.iter().map(|t| m.multiplier(*t).0).collect(),
            None => vec![1.0; self.config.output_dim()],
        }
    }

    /// `max_k ‖W_k W_kᵀ − I‖_F`.
    pub fn orthogonality_drift(&self) -> f64 {
        self.bimaps
            .iter()
            .map(|w| (w * w.transpose() - Matrix::identity(w.nrows(), w.nrows())).norm())
            .fold(0.0, f64::max)
    }

    /// All parameters: BiMap weights, ALog parameters, classifier weights
    /// (each row-major), bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in &self.bimaps {
            out.extend(row_major(w));
        }
        out.extend_from_slice(&self.alog);
        out.extend(row_major(&self.classifier));
        out.extend(self.bias.iter());
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.parameters().len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        let mut at = 0;
        for w in &mut self.bimaps {
            let len = w.len();
            fill_row_major(w, &values[at..at + len]);
            at += len;
        }
        let len = self.alog.len();
        self.alog.copy_from_slice(&values[at..at + len]);
        at += len;
        let len = self.classifier.len();
        fill_row_major(&mut self.classifier, &values[at..at + len]);
        at += len;
        self.bias.copy_from_slice(&values[at..]);
        Ok(())
    }
}

/// Forward pass for one input; returns the logits and what backward needs.
pub fn forward(state: &TrainState, s: &SpdMatrix) -> Result<(Vector, ForwardCache)> {
    let d0 = state.config.input_dim();
    if s.dim() != d0 {
        return Err(Error::DimensionMismatch {
            expected: d0,
            got: s.dim(),
        });
    }
    let last = state.bimaps.len() - 1;
    let mut x = s.clone();
    let mut bimap_inputs = Vec::with_capacity(state.bimaps.len());
    let mut reeig_eigs = Vec::with_capacity(last);
    let mut boundary_min_eigs = Vec::with_capacity(state.bimaps.len());
    for (k, w) in state.bimaps.iter().enumerate() {
        let y = bimap_unchecked(w, &x);
        bimap_inputs.push(x);
        if k < last {
            let (z, eig) = reeig_forward(&y, state.config.reeig_eps)?;
            boundary_min_eigs.push(eig.sigma()[eig.dim() - 1]);
            reeig_eigs.push(eig);
            x = z;
        } else {
            x = y;
        }
    }
    let multiplier = state.alog_multiplier();
    let (out, head_eig) = alog_forward(&x, &multiplier)?;
    boundary_min_eigs.push(head_eig.sigma()[head_eig.dim() - 1]);
    let features = Vector::from_iterator(out.dim() * out.dim(), row_major(out.as_matrix()));
    let logits = &state.classifier * &features + &state.bias;
    Ok((
        logits,
        ForwardCache {
            bimap_inputs,
            reeig_eigs,
            head_eig,
            multiplier,
            features,
            boundary_min_eigs,
        },
    ))
}

/// Softmax cross-entropy via log-sum-exp; returns the loss and its gradient
/// with respect to the logits.
pub fn loss_softmax_ce(logits: &Vector, label: usize) -> Result<(f64, Vector)> {
    if label >= logits.len() {
        return Err(Error::InvalidInput(format!("label {label} out of range for {} classes", logits.len())));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = shifted.iter().sum();
    let lse = max + sum.ln();
    let mut grad = Vector::from_iterator(logits.len(), shifted.iter().map(|e| e / sum));
    grad[label] -= 1.0;
    Ok((lse - logits[label], grad))
}

/// Backward pass for one input.
pub fn backward(state: &TrainState, cache: &ForwardCache, grad_logits: &Vector) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(state);
    grads.classifier = grad_logits * cache.features.transpose();
    grads.bias = grad_logits.clone();

    let d = state.config.output_dim();
    let g_feat = state.classifier.transpose() * grad_logits;
    let g_x = Matrix::from_row_slice(d, d, g_feat.as_slice());
    let (mut g, grad_multiplier) = alog_backward(&cache.head_eig, &cache.multiplier, &SymMatrix::from_matrix(&g_x)?)?;
    if let Some(mode) = state.config.alog_mode {
        for (i, t) in state.alog.iter().enumerate() {
            grads.alog[i] = grad_multiplier[i] * mode.multiplier(*t).1;
        }
    }

    let last = state.bimaps.len() - 1;
    for k in (0..=last).rev() {
        if k < last {
            g = reeig_backward(&cache.reeig_eigs[k], state.config.reeig_eps, &g)?;
        }
        let (gw, gs) = bimap_backward(&state.bimaps[k], &cache.bimap_inputs[k], g.as_matrix());
        grads.bimaps[k] = gw;
        g = gs;
    }
    Ok(grads)
}

/// SGD on Euclidean parameters, a Stiefel step for BiMap weights, and
/// positive-scalar RSGD for GEOM bases.
pub fn apply_gradients(state: &mut TrainState, grads: &Gradients, lr: f64) {
    for (w, g) in state.bimaps.iter_mut().zip(&grads.bimaps) {
        *w = stiefel_update(w, g, lr);
    }
    match state.config.alog_mode {
        Some(AlogMode::Geom) => {
            for (a, g) in state.alog.iter_mut().zip(&grads.alog) {
                *a = rsgd_positive_scalar(*a, *g, lr);
            }
        }
        Some(_) => {
            for (a, g) in state.alog.iter_mut().zip(&grads.alog) {
                *a -= lr * g;
            }
        }
        None => {}
    }
    state.classifier -= &grads.classifier * lr;
    state.bias -= &grads.bias * lr;
}

/// Optional thread pool for per-sample work. Results are always reduced in
/// sample order, so the thread count does not change any output bit.
pub struct Parallelism {
    pool: Option<rayon::ThreadPool>,
}

impl Parallelism {
    pub fn serial() -> Self {
        Self { pool: None }
    }

    pub fn new(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self { pool: Some(pool) })
    }

    pub fn map<T, F>(&self, items: &[usize], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => items.iter().map(|&i| f(i)).collect(),
            Some(pool) => pool.install(|| items.par_iter().map(|&i| f(i)).collect()),
        }
    }
}

struct SampleResult {
    loss: f64,
    correct: bool,
    violations: usize,
    grads: Gradients,
}

fn argmax(v: &Vector) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn sample_step(state: &TrainState, data: &SpdDataset, i: usize) -> Result<SampleResult> {
    let sample = &data.samples[i];
    let (logits, cache) = forward(state, &sample.matrix)?;
    let (loss, grad_logits) = loss_softmax_ce(&logits, sample.label)?;
    let grads = backward(state, &cache, &grad_logits)?;
    Ok(SampleResult {
        loss,
        correct: argmax(&logits) == sample.label,
        violations: cache.spd_violations(),
        grads,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchStats {
    pub loss_sum: f64,
    pub correct: usize,
    pub count: usize,
    pub spd_violations: usize,
}

fn check_dataset(state: &TrainState, data: &SpdDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    if data.dim != state.config.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: state.config.input_dim(),
            got: data.dim,
        });
    }
    if data.class_count > state.config.num_classes {
        return Err(Error::DimensionMismatch {
            expected: state.config.num_classes,
            got: data.class_count,
        });
    }
    Ok(())
}

/// Draws the shuffled mini-batches of the next epoch from the state RNG.
pub fn epoch_batches(state: &mut TrainState, n: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut state.rng);
    order.chunks(state.config.batch_size).map(<[usize]>::to_vec).collect()
}

/// One SGD step on the mean gradient of the given samples.
pub fn train_step(state: &mut TrainState, data: &SpdDataset, batch: &[usize], par: &Parallelism) -> Result<BatchStats> {
    let results = par.map(batch, |i| sample_step(state, data, i));
    let mut total = Gradients::zeros_like(state);
    let mut stats = BatchStats::default();
    for r in results {
        let r = r?;
        total.add_assign(&r.grads);
        stats.loss_sum += r.loss;
        stats.correct += usize::from(r.correct);
        stats.spd_violations += r.violations;
        stats.count += 1;
    }
    let epoch = state.epoch + 1;
    if !stats.loss_sum.is_finite() {
        return Err(Error::Numerical(format!("non-finite training loss in epoch {epoch}")));
    }
    total.scale(1.0 / stats.count as f64);
    let lr = state.config.lr;
    apply_gradients(state, &total, lr);
    if state.parameters().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("parameters became non-finite in epoch {epoch}")));
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub spd_violations: usize,
}

pub fn train_epoch(state: &mut TrainState, data: &SpdDataset, par: &Parallelism) -> Result<EpochMetrics> {
    check_dataset(state, data)?;
    let batches = epoch_batches(state, data.len());
    let mut total = BatchStats::default();
    for batch in &batches {
        let s = train_step(state, data, batch, par)?;
        total.loss_sum += s.loss_sum;
        total.correct += s.correct;
        total.count += s.count;
        total.spd_violations += s.spd_violations;
    }
    state.epoch += 1;
    let train_loss = total.loss_sum / total.count as f64;
    if !train_loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite training loss in epoch {}", state.epoch)));
    }
    if state.config.alog_mode == Some(AlogMode::Div) {
        log::debug!("epoch {} effective 1/b = {:?}", state.epoch, state.alog_multiplier());
    }
    if total.spd_violations > 0 {
        log::warn!("epoch {}: {} SPD violations", state.epoch, total.spd_violations);
    }
    Ok(EpochMetrics {
        epoch: state.epoch,
        train_loss,
        train_acc: total.correct as f64 / total.count as f64,
        spd_violations: total.spd_violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    /// Recall per true class; `None` for classes without samples.
    pub fn recall(&self) -> Vec<Option<f64>> {
        self.confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total: usize = row.iter().sum();
                (total > 0).then(|| row[c] as f64 / total as f64)
            })
            .collect()
    }
}

pub fn evaluate(state: &TrainState, data: &SpdDataset, par: &Parallelism) -> Result<Evaluation> {
    check_dataset(state, data)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let results = par.map(&idx, |i| -> Result<(f64, usize)> {
        let s = &data.samples[i];
        let (logits, _) = forward(state, &s.matrix)?;
        let (loss, _) = loss_softmax_ce(&logits, s.label)?;
        Ok((loss, argmax(&logits)))
    });
    let c = state.config.num_classes;
    let mut confusion = vec![vec![0; c]; c];
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for (i, r) in results.into_iter().enumerate() {
        let (loss, pred) = r?;
        let label = data.samples[i].label;
        loss_sum += loss;
        correct += usize::from(pred == label);
        confusion[label][pred] += 1;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        mean_loss: loss_sum / data.len() as f64,
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub eval_acc: Option<f64>,
    pub elapsed_s: f64,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let eval = self.eval_acc.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{:.3}",
            self.epoch, self.train_loss, self.train_acc, eval, self.elapsed_s
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<MetricsRow>,
    pub spd_violations: usize,
    pub max_orthogonality_drift: f64,
}

/// Runs `config.epochs` epochs, evaluating on `eval` after each one.
/// With `timing` off, `elapsed_s` is recorded as zero.
pub fn fit(
    state: &mut TrainState,
    train: &SpdDataset,
    eval: Option<&SpdDataset>,
    par: &Parallelism,
    timing: bool,
    mut on_epoch: impl FnMut(&MetricsRow),
) -> Result<TrainReport> {
    let start = Instant::now();
    let mut report = TrainReport {
        rows: Vec::new(),
        spd_violations: 0,
        max_orthogonality_drift: state.orthogonality_drift(),
    };
    for _ in 0..state.config.epochs {
        let m = train_epoch(state, train, par)?;
        let eval_acc = match eval {
            Some(e) => Some(evaluate(state, e, par)?.accuracy),
            None => None,
        };
        report.spd_violations += m.spd_violations;
        report.max_orthogonality_drift = report.max_orthogonality_drift.max(state.orthogonality_drift());
        let row = MetricsRow {
            epoch: m.epoch,
            train_loss: m.train_loss,
            train_acc: m.train_acc,
            eval_acc,
            elapsed_s: if timing { start.elapsed().as_secs_f64() } else { 0.0 },
        };
        on_epoch(&row);
        report.rows.push(row);
    }
    Ok(report)
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(Error::Parse("checkpoint is truncated".into()));
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().expect("16 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Layout: magic `SPDN`, `u32` version; config (`u32` dim count, `u32`
/// dims, `u8` mode, `f64` ReEig ε, `u32` classes, `f64` lr, `u32` batch size,
/// `u32` epochs, `u64` seed); `u64` epoch; parameters as in
/// [`TrainState::parameters`] as `f64`; RNG seed (32 bytes), `u64` stream,
/// `u128` word position. Little-endian throughout.
pub fn checkpoint_bytes(state: &TrainState) -> Result<Vec<u8>> {
    let cfg = &state.config;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_u32(&mut out, cfg.dims.len())?;
    for d in &cfg.dims {
        put_u32(&mut out, *d)?;
    }
    out.push(AlogMode::code(cfg.alog_mode));
    out.extend_from_slice(&cfg.reeig_eps.to_le_bytes());
    put_u32(&mut out, cfg.num_classes)?;
    out.extend_from_slice(&cfg.lr.to_le_bytes());
    put_u32(&mut out, cfg.batch_size)?;
    put_u32(&mut out, cfg.epochs)?;
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.extend_from_slice(&(state.epoch as u64).to_le_bytes());
    for p in state.parameters() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out.extend_from_slice(&state.rng.get_seed());
    out.extend_from_slice(&state.rng.get_stream().to_le_bytes());
    out.extend_from_slice(&state.rng.get_word_pos().to_le_bytes());
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<TrainState> {
    let mut c = Cursor { bytes, at: 0 };
    let magic: [u8; 4] = c.take(4)?.try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n_dims = c.u32()? as usize;
    if n_dims > 64 {
        return Err(Error::Parse(format!("implausible layer count {n_dims}")));
    }
    let dims = (0..n_dims).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let cfg = NetworkConfig {
        dims,
        alog_mode: AlogMode::from_code(c.u8()?)?,
        reeig_eps: c.f64()?,
        num_classes: c.u32()? as usize,
        lr: c.f64()?,
        batch_size: c.u32()? as usize,
        epochs: c.u32()? as usize,
        seed: c.u64()?,
    };
    let mut state = init_network(&cfg, cfg.seed)?;
    state.epoch = c.u64()? as usize;
    let count = state.parameters().len();
    let params = (0..count).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    state.set_parameters(&params)?;
    let seed: [u8; 32] = c.take(32)?.try_into().expect("32 bytes");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(c.u64()?);
    rng.set_word_pos(c.u128()?);
    state.rng = rng;
    if c.at != bytes.len() {
        return Err(Error::Parse("trailing bytes in checkpoint".into()));
    }
    Ok(state)
}

pub fn save_checkpoint(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&checkpoint_bytes(state)?)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    checkpoint_from_bytes(&bytes)
}
