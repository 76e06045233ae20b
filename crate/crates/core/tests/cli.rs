use std::path::Path;
use std::process::{Command, Output};

use alem::data::{LoadPolicy, SpdDataset};

fn alem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alem"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn gen_small(dir: &Path, name: &str, seed: &str) {
    let o = alem(
        &["gen-data", "--dim", "4", "--samples-per-class", "8", "--seed", seed, "--out", name],
        dir,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_data_is_seeded_and_validated() {
    let d = tempfile::tempdir().unwrap();
    gen_small(d.path(), "a.spdd", "3");
    gen_small(d.path(), "b.spdd", "3");
    gen_small(d.path(), "c.spdd", "4");
    let read = |n: &str| std::fs::read(d.path().join(n)).unwrap();
    assert_eq!(read("a.spdd"), read("b.spdd"));
    assert_ne!(read("a.spdd"), read("c.spdd"));
    let ds = SpdDataset::load(d.path().join("a.spdd"), LoadPolicy::Reject).unwrap();
    assert_eq!((ds.dim, ds.class_count, ds.len()), (4, 3, 24));

    for bad in [["--spread", "0"], ["--spread", "-1"]] {
        let o = alem(&["gen-data", bad[0], bad[1], "--out", "x.spdd"], d.path());
        assert_eq!(o.status.code(), Some(2));
    }
    assert_eq!(alem(&["gen-data", "--no-such-flag"], d.path()).status.code(), Some(2));
    assert_eq!(alem(&["frobnicate"], d.path()).status.code(), Some(2));
}

#[test]
fn train_then_eval() {
    let d = tempfile::tempdir().unwrap();
    gen_small(d.path(), "data.spdd", "0");
    let train = |out: &str, alog: &str| {
        alem(
            &[
                "train", "--data", "data.spdd", "--dims", "4,3", "--alog", alog, "--epochs", "20", "--batch-size", "6",
                "--no-timing", "--out", out,
            ],
            d.path(),
        )
    };
    let o = train("run1", "geom");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(train("run2", "geom").status.code(), Some(0));
    let csv1 = std::fs::read_to_string(d.path().join("run1/metrics.csv")).unwrap();
    let csv2 = std::fs::read_to_string(d.path().join("run2/metrics.csv")).unwrap();
    assert_eq!(csv1, csv2);
    assert_eq!(csv1.lines().next().unwrap(), "epoch,train_loss,train_acc,eval_acc,elapsed_s");
    assert_eq!(csv1.lines().count(), 21);

    let o = train("base", "none");
    assert_eq!(o.status.code(), Some(0));
    let model = d.path().join("base/model.spdn");
    let state = alem::spdnet::load_checkpoint(&model).unwrap();
    assert_eq!(state.config.alog_mode, None);
    assert!(state.alog.is_empty());

    let o = alem(&["eval", "--checkpoint", "run1/model.spdn", "--data", "data.spdd"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["metric", "class", "value"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(&rows[0][0], "accuracy");
    let acc: f64 = rows[0][2].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(rows.iter().filter(|r| &r[0] == "recall").count(), 3);

    let o = alem(&["gen-data", "--dim", "5", "--samples-per-class", "4", "--out", "five.spdd"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let o = alem(&["eval", "--checkpoint", "run1/model.spdn", "--data", "five.spdd"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let o = alem(&["train", "--data", "five.spdd", "--dims", "4,3", "--out", "bad"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let o = alem(&["train", "--data", "missing.spdd", "--out", "bad"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergent_training_reports_numerical_failure() {
    let d = tempfile::tempdir().unwrap();
    gen_small(d.path(), "data.spdd", "0");
    let o = alem(
        &["train", "--data", "data.spdd", "--dims", "4,3", "--alog", "mul", "--lr", "1e300", "--epochs", "5", "--out", "r"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn geometry_queries() {
    let d = tempfile::tempdir().unwrap();
    let e2 = std::f64::consts::E.powi(2);
    let a = write(d.path(), "a.txt", "2\n2 0.5\n0.5 1\n");
    let b = write(d.path(), "b.txt", "2\n1 0\n0 3\n");
    let one = write(d.path(), "one.txt", "1\n1\n");
    let big = write(d.path(), "big.txt", &format!("1\n{e2:.17e}\n"));

    let o = alem(&["geometry", "--metric", "lcm", &a, &a], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.0);

    let lem: f64 = stdout(&alem(&["geometry", &a, &b], d.path())).trim().parse().unwrap();
    let e = format!("alem:{:.17e}", std::f64::consts::E);
    let alem_e: f64 = stdout(&alem(&["geometry", "--metric", &e, &a, &b], d.path())).trim().parse().unwrap();
    assert!((lem - alem_e).abs() <= 1e-12);

    let o = alem(&["geometry", "--op", "mean", &big, &one], d.path());
    let mean = alem::spd::text::parse_matrix(&stdout(&o)).unwrap();
    assert!((mean[(0, 0)] - std::f64::consts::E).abs() <= 1e-14);

    let alpha = write(d.path(), "alpha.txt", "2 5\n");
    let o = alem(&["geometry", "--metric", &format!("alem:{alpha}"), "--op", "geodesic", "--t", "0", &a, &b], d.path());
    assert_eq!(o.status.code(), Some(0));
    let g = alem::spd::text::parse_matrix(&stdout(&o)).unwrap();
    assert!((g - alem::spd::text::parse_matrix("2\n2 0.5\n0.5 1\n").unwrap()).norm() <= 1e-12);

    let bad = write(d.path(), "bad.txt", "2\n1 2\n2 1\n");
    assert_eq!(alem(&["geometry", &a, &bad], d.path()).status.code(), Some(2));
    assert_eq!(alem(&["geometry", "--policy", "jitter", &a, &one], d.path()).status.code(), Some(2));
    assert_eq!(alem(&["geometry", "--metric", "xyz", &a, &b], d.path()).status.code(), Some(2));
}

#[test]
fn check_grad_detects_injected_fault() {
    let d = tempfile::tempdir().unwrap();
    let o = alem(&["check-grad", "--dims", "3,4", "--trials", "2", "--seed", "9"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("d_mlog"));
    let o = alem(&["check-grad", "--dims", "3", "--trials", "2", "--inject-fault"], d.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "gen.cfg", "# defaults\ndim = 3\nsamples-per-class = 5\nout = cfg.spdd\n");
    let o = alem(&["gen-data", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ds = SpdDataset::load(d.path().join("cfg.spdd"), LoadPolicy::Reject).unwrap();
    assert_eq!((ds.dim, ds.len()), (3, 15));

    let o = alem(&["gen-data", "--config", &cfg, "--dim", "2"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let ds = SpdDataset::load(d.path().join("cfg.spdd"), LoadPolicy::Reject).unwrap();
    assert_eq!(ds.dim, 2);

    let bad = write(d.path(), "bad.cfg", "colour = blue\n");
    assert_eq!(alem(&["gen-data", "--config", &bad], d.path()).status.code(), Some(2));
    assert_eq!(alem(&["gen-data", "--config", "nope.cfg"], d.path()).status.code(), Some(2));
}

#[test]
fn bench_runs() {
    let d = tempfile::tempdir().unwrap();
    let o = alem(&["bench", "--dims", "4,8", "--reps", "2"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().filter(|l| !l.is_empty()).count() >= 2);
}
