//! Trains the {10, 5} network on the default synthetic dataset with every
//! ALog mode and the LogEig baseline, then reports held-out accuracy.

use alem::data::{generate_synthetic, train_test_split, SyntheticSpec};
use alem::spdnet::{evaluate, fit, init_network, AlogMode, NetworkConfig, Parallelism};

fn main() -> alem::Result<()> {
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let (train, test) = train_test_split(&data, 0.5, 0)?;
    let par = Parallelism::serial();
    let modes = [
        None,
        Some(AlogMode::Mul),
        Some(AlogMode::Div),
        Some(AlogMode::Relu),
        Some(AlogMode::Geom),
    ];
    for mode in modes {
        let cfg = NetworkConfig {
            alog_mode: mode,
            ..Default::default()
        };
        let mut state = init_network(&cfg, cfg.seed)?;
        let report = fit(&mut state, &train, Some(&test), &par, true, |_| {})?;
        let last = report.rows.last().expect("at least one epoch");
        let held_out = evaluate(&state, &test, &par)?;
        println!(
            "{:>6}: train_acc {:.3}  test_acc {:.3}  loss {:.4}  {:.2}s",
            mode.map_or("logeig", AlogMode::name),
            last.train_acc,
            held_out.accuracy,
            last.train_loss,
            last.elapsed_s
        );
    }
    Ok(())
}
