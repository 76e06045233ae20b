//! Generates a synthetic dataset, writes and reloads it, and makes a
//! stratified split.

use alem::data::{generate_synthetic, train_test_split, LoadPolicy, SpdDataset, SyntheticSpec};

fn main() -> alem::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec {
        dim: 6,
        samples_per_class: 12,
        seed: 4,
        ..Default::default()
    })?;
    let dir = std::env::temp_dir().join("alem-dataset-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("synthetic.spdd");
    ds.save(&path)?;
    let back = SpdDataset::load(&path, LoadPolicy::Reject)?;
    println!(
        "{}: dim {} classes {} samples {} ({} bytes), identical after reload: {}",
        back.name,
        back.dim,
        back.class_count,
        back.len(),
        std::fs::metadata(&path)?.len(),
        back.samples == ds.samples
    );
    let (train, test) = train_test_split(&back, 0.75, 0)?;
    println!("train per class {:?}, test per class {:?}", train.class_sizes(), test.class_sizes());
    Ok(())
}
