//! Bi-, exponential and similarity invariance residuals. Similarity
//! invariance holds for constant bases only; the non-constant line shows
//! the size of the violation.

use alem::geometry::{check_bi_invariance, check_exponential_invariance, check_similarity_invariance, PullbackMetric};
use alem::spd::random::{random_base_vector, random_rotation, random_spd};
use alem::spd::BaseVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> alem::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 4;
    let alpha = random_base_vector(&mut rng, n);
    let constant = BaseVector::constant(n, 3.0)?;
    let (mut bi, mut ex, mut sim, mut sim_c) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let pts: Vec<_> = (0..3).map(|_| random_spd(&mut rng, n, 10.0)).collect();
        for m in [PullbackMetric::Lem, PullbackMetric::Lcm, PullbackMetric::Alem(alpha.clone())] {
            bi = bi.max(check_bi_invariance(&m, &pts[0], &pts[1], &pts[2])?);
        }
        for beta in [-1.0, 0.5, 2.5] {
            ex = ex.max(check_exponential_invariance(&pts, beta, &alpha)?);
        }
        let r = random_rotation(&mut rng, n);
        for s in [0.1, 1.0, 7.0] {
            sim = sim.max(check_similarity_invariance(&pts[0], &pts[1], &r, s, &alpha)?);
            sim_c = sim_c.max(check_similarity_invariance(&pts[0], &pts[1], &r, s, &constant)?);
        }
    }
    println!("bi-invariance                    {bi:.2e}");
    println!("exponential invariance           {ex:.2e}");
    println!("similarity, constant base        {sim_c:.2e}");
    println!("similarity, per-axis bases       {sim:.2e}");
    Ok(())
}
