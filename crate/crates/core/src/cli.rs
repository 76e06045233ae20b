//! Command-line interface: `gen-data`, `train`, `eval`, `geometry`,
//! `check-grad` and `bench`.
//!
//! Every subcommand accepts `--config FILE`, a flat `key=value` file whose
//! keys are long flag names; flags given on the command line win. Exit
//! codes: 0 success, 1 check failure, 2 usage or configuration error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{generate_synthetic, train_test_split, LoadPolicy, SpdDataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::geometry::{PullbackGeometry, PullbackMetric};
use crate::gradcheck::{format_table, run_suite, Fault, GradCheckOptions};
use crate::spd::random::random_spd;
use crate::spd::text::{format_matrix, parse_matrix};
use crate::spd::{BaseVector, SpdMatrix};
use crate::spdnet::{
    backward, evaluate, fit, forward, init_network, load_checkpoint, loss_softmax_ce, metrics_csv, save_checkpoint,
    AlogMode, NetworkConfig, Parallelism,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "alem", version, about = "Adaptive log-Euclidean geometry and SPD networks")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Seed for every random choice made by the command.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// key=value file with defaults for any long flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-sample work; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic SPD classification dataset.
    GenData(GenDataArgs),
    /// Train an SPD network; writes model.spdn and metrics.csv.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Distances, means and geodesics under LEM, LCM or ALEM.
    Geometry(GeometryArgs),
    /// Finite-difference check of all differentials and gradients.
    CheckGrad(CheckGradArgs),
    /// Time forward and backward passes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 30)]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub spread: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub rotation_noise: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Policy {
    Reject,
    Jitter,
}

impl From<Policy> for LoadPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Reject => LoadPolicy::Reject,
            Policy::Jitter => LoadPolicy::Jitter,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset file; split into train and held-out parts unless
    /// `--test-data` is given.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Training fraction of the stratified split.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    /// BiMap dimensions, e.g. `10,5`.
    #[arg(long, value_delimiter = ',', default_value = "10,5")]
    pub dims: Vec<usize>,
    /// mul, div, relu, geom, or none for LogEig.
    #[arg(long, default_value = "mul")]
    pub alog: String,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 30)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = crate::autodiff::REEIG_EPS)]
    pub reeig_eps: f64,
    #[arg(long, value_enum, default_value_t = Policy::Reject)]
    pub policy: Policy,
    /// Write 0 in the elapsed_s column.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Policy::Reject)]
    pub policy: Policy,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum GeometryOp {
    Distance,
    Mean,
    Geodesic,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub common: Common,
    /// lem, lcm, or alem:<scalar or file of n values>.
    #[arg(long, default_value = "lem")]
    pub metric: String,
    #[arg(long, value_enum, default_value_t = GeometryOp::Distance)]
    pub op: GeometryOp,
    /// Matrix files: a dimension line followed by the rows.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Position along the geodesic.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub t: f64,
    /// Fréchet mean weights, one per input.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Policy::Reject)]
    pub policy: Policy,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "3,4,6")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Negate the divided-difference kernel to confirm failures are caught.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "16,64,128")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::Overflow(_) | Error::DegenerateSpectrum { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Splits `--config FILE` out of the raw arguments and inserts the file's
/// entries as flags right after the subcommand, so explicit flags override
/// them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config_path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            config_path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let sub_pos = strs
        .iter()
        .position(|a| Cli::command().find_subcommand(a).is_some())
        .ok_or_else(|| Error::Config("--config needs a subcommand".into()))?;
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(&strs[sub_pos]).expect("position found above");
    let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
    let mut injected: Vec<OsString> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{path}:{}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(Error::Config(format!("{path}:{}: config files cannot nest", lineno + 1)));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| Error::Config(format!("{path}:{}: unknown key {key:?}", lineno + 1)))?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        } else {
            match value {
                "true" | "1" | "yes" => injected.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                other => return Err(Error::Config(format!("{path}:{}: {key} expects a boolean, got {other:?}", lineno + 1))),
            }
        }
    }
    let mut out: Vec<OsString> = args[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_pos + 1..]);
    Ok(out)
}

/// Parses and runs a command line, writing normal output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::GenData(a) => cmd_gen_data(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Geometry(a) => cmd_geometry(&a, out),
        Command::CheckGrad(a) => cmd_check_grad(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!("{} does not exist", path.display())));
    }
    Ok(())
}

pub fn cmd_gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = SyntheticSpec {
        dim: a.dim,
        class_count: a.classes,
        samples_per_class: a.samples_per_class,
        eigenvalue_spread: a.spread,
        rotation_noise: a.rotation_noise,
        seed: a.common.seed,
    };
    spec.validate()?;
    let path = a.common.out.clone().unwrap_or_else(|| PathBuf::from("synthetic.spdd"));
    let ds = generate_synthetic(&spec)?;
    ds.save(&path)?;
    writeln!(
        out,
        "dim={} classes={} samples={} -> {}",
        ds.dim,
        ds.class_count,
        ds.len(),
        path.display()
    )
    .map_err(io)?;
    Ok(EXIT_OK)
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    require_file(&a.data)?;
    if let Some(t) = &a.test_data {
        require_file(t)?;
    }
    let out_dir = a.common.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    let cfg = NetworkConfig {
        dims: a.dims.clone(),
        alog_mode: AlogMode::parse(&a.alog)?,
        reeig_eps: a.reeig_eps,
        num_classes: 0,
        lr: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: a.common.seed,
    };
    let policy = a.policy.into();
    let data = SpdDataset::load(&a.data, policy)?;
    let (train, test) = match &a.test_data {
        Some(t) => (data, SpdDataset::load(t, policy)?),
        None => train_test_split(&data, a.split, a.common.seed)?,
    };
    let cfg = NetworkConfig {
        num_classes: train.class_count.max(test.class_count),
        ..cfg
    };
    cfg.validate()?;
    if cfg.input_dim() != train.dim {
        return Err(Error::Config(format!(
            "first dimension {} does not match dataset dimension {}",
            cfg.input_dim(),
            train.dim
        )));
    }
    fs::create_dir_all(&out_dir)?;
    let par = Parallelism::new(a.common.threads)?;
    let mut state = init_network(&cfg, cfg.seed)?;
    let report = fit(&mut state, &train, Some(&test), &par, !a.no_timing, |row| {
        log::info!("{}", row.to_csv_line());
    })?;
    let metrics_path = out_dir.join("metrics.csv");
    fs::write(&metrics_path, metrics_csv(&report.rows))?;
    let model_path = out_dir.join("model.spdn");
    save_checkpoint(&state, &model_path)?;
    let last = report.rows.last();
    writeln!(
        out,
        "epochs={} train_acc={} eval_acc={} spd_violations={} -> {}",
        report.rows.len(),
        last.map_or(f64::NAN, |r| r.train_acc),
        last.and_then(|r| r.eval_acc).map_or(f64::NAN, |a| a),
        report.spd_violations,
        out_dir.display()
    )
    .map_err(io)?;
    Ok(EXIT_OK)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    require_file(&a.checkpoint)?;
    require_file(&a.data)?;
    let state = load_checkpoint(&a.checkpoint)?;
    let data = SpdDataset::load(&a.data, a.policy.into())?;
    if data.dim != state.config.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: state.config.input_dim(),
            got: data.dim,
        });
    }
    let par = Parallelism::new(a.common.threads)?;
    let ev = evaluate(&state, &data, &par)?;
    let mut text = String::from("metric,class,value\n");
    text.push_str(&format!("accuracy,,{}\nmean_loss,,{}\n", ev.accuracy, ev.mean_loss));
    for (c, r) in ev.recall().iter().enumerate() {
        if let Some(r) = r {
            text.push_str(&format!("recall,{c},{r}\n"));
        }
    }
    out.write_all(text.as_bytes()).map_err(io)?;
    if let Some(p) = &a.common.out {
        fs::write(p, text)?;
    }
    Ok(EXIT_OK)
}

/// `lem`, `lcm`, or `alem:<x>` where `x` is a scalar base or a file of `n`
/// whitespace-separated bases.
pub fn parse_metric(spec: &str, dim: usize) -> Result<PullbackMetric> {
    let lower = spec.to_ascii_lowercase();
    match lower.as_str() {
        "lem" => return Ok(PullbackMetric::Lem),
        "lcm" => return Ok(PullbackMetric::Lcm),
        _ => {}
    }
    let rest = spec
        .strip_prefix("alem:")
        .or_else(|| spec.strip_prefix("ALEM:"))
        .ok_or_else(|| Error::Config(format!("unknown metric {spec:?}")))?;
    let alpha = if let Ok(a) = rest.parse::<f64>() {
        vec![a; dim]
    } else {
        let text = fs::read_to_string(rest).map_err(|e| Error::Config(format!("cannot read alpha file {rest}: {e}")))?;
        let v: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad alpha value {t:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        v
    };
    Ok(PullbackMetric::Alem(BaseVector::from_alpha(&alpha)?))
}

fn read_spd(path: &Path, policy: LoadPolicy) -> Result<SpdMatrix> {
    require_file(path)?;
    let m = parse_matrix(&fs::read_to_string(path)?)?;
    let sym = crate::spd::SymMatrix::from_matrix(&m)?;
    match policy {
        LoadPolicy::Reject => SpdMatrix::new(sym),
        LoadPolicy::Jitter => SpdMatrix::repair(sym).map(|(s, _)| s),
    }
}

pub fn cmd_geometry(a: &GeometryArgs, out: &mut dyn Write) -> Result<i32> {
    let policy = a.policy.into();
    let points: Vec<SpdMatrix> = a.inputs.iter().map(|p| read_spd(p, policy)).collect::<Result<_>>()?;
    let dim = points[0].dim();
    let metric = parse_metric(&a.metric, dim)?;
    let text = match a.op {
        GeometryOp::Distance => {
            if points.len() != 2 {
                return Err(Error::Config("distance needs exactly two inputs".into()));
            }
            format!("{:.16e}\n", metric.distance(&points[0], &points[1])?)
        }
        GeometryOp::Geodesic => {
            if points.len() != 2 {
                return Err(Error::Config("geodesic needs exactly two inputs".into()));
            }
            format_matrix(metric.geodesic(&points[0], &points[1], a.t)?.as_matrix())
        }
        GeometryOp::Mean => {
            let weights = a.weights.clone().unwrap_or_else(|| vec![1.0; points.len()]);
            format_matrix(metric.weighted_frechet_mean(&points, &weights)?.as_matrix())
        }
    };
    out.write_all(text.as_bytes()).map_err(io)?;
    if let Some(p) = &a.common.out {
        fs::write(p, text)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_check_grad(a: &CheckGradArgs, out: &mut dyn Write) -> Result<i32> {
    let opts = GradCheckOptions {
        dims: a.dims.clone(),
        trials: a.trials,
        seed: a.common.seed,
        fault: a.inject_fault.then_some(Fault::FlipKernelSign),
    };
    let results = run_suite(&opts)?;
    let table = format_table(&results);
    out.write_all(table.as_bytes()).map_err(io)?;
    let failed = results.iter().filter(|r| !r.passed()).count();
    writeln!(out, "{} checks, {} failed", results.len(), failed).map_err(io)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    writeln!(out, "dim,forward_ms,backward_ms").map_err(io)?;
    for &d in &a.dims {
        let cfg = NetworkConfig {
            dims: vec![d, (d / 2).max(1)],
            ..Default::default()
        };
        let state = init_network(&cfg, a.common.seed)?;
        let inputs: Vec<SpdMatrix> = (0..a.reps.max(1)).map(|_| random_spd(&mut rng, d, 100.0)).collect();
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for s in &inputs {
            let t0 = Instant::now();
            let (logits, cache) = forward(&state, s)?;
            let t1 = Instant::now();
            let (_, g) = loss_softmax_ce(&logits, 0)?;
            backward(&state, &cache, &g)?;
            bwd += t1.elapsed().as_secs_f64();
            fwd += (t1 - t0).as_secs_f64();
        }
        let n = inputs.len() as f64;
        writeln!(out, "{d},{:.3},{:.3}", 1e3 * fwd / n, 1e3 * bwd / n).map_err(io)?;
    }
    Ok(EXIT_OK)
}
