//! Geometric updates of a positive base and Euclidean updates of its
//! logarithm follow the same trajectory, both for a scalar toy problem and
//! inside network training.

use alem::autodiff::geom_equals_div_check;
use alem::data::{generate_synthetic, train_test_split, SyntheticSpec};
use alem::spdnet::{epoch_batches, init_network, train_step, AlogMode, NetworkConfig, Parallelism};

fn main() -> alem::Result<()> {
    let grads: Vec<f64> = (0..100).map(|t| (t as f64 * 0.37).sin()).collect();
    println!("scalar trajectory gap   {:.2e}", geom_equals_div_check(1.7, 0.1, &grads)?);

    let data = generate_synthetic(&SyntheticSpec::default())?;
    let (train, _) = train_test_split(&data, 0.5, 0)?;
    let make = |mode| {
        init_network(
            &NetworkConfig {
                alog_mode: Some(mode),
                ..Default::default()
            },
            0,
        )
    };
    let (mut div, mut geom) = (make(AlogMode::Div)?, make(AlogMode::Geom)?);
    let par = Parallelism::serial();
    let mut gap: f64 = 0.0;
    for _ in 0..20 {
        let batches = epoch_batches(&mut div, train.len());
        epoch_batches(&mut geom, train.len());
        for b in &batches {
            train_step(&mut div, &train, b, &par)?;
            train_step(&mut geom, &train, b, &par)?;
            for (b, a) in div.alog.iter().zip(&geom.alog) {
                gap = gap.max((a.ln() - b).abs());
            }
        }
    }
    println!("network trajectory gap  {gap:.2e}");
    Ok(())
}
