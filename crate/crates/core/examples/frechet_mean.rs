//! Closed-form weighted Fréchet means, checked against random perturbations
//! of the mean that can only increase the weighted dispersion.

use alem::geometry::{PullbackGeometry, PullbackMetric, TangentVector};
use alem::spd::random::{random_base_vector, random_spd, random_sym};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> alem::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<_> = (0..5).map(|_| random_spd(&mut rng, 3, 20.0)).collect();
    let weights = [1.0, 2.0, 0.5, 1.5, 1.0];
    let metrics = [
        PullbackMetric::Lem,
        PullbackMetric::Lcm,
        PullbackMetric::Alem(random_base_vector(&mut rng, 3)),
    ];
    for m in &metrics {
        let mean = m.weighted_frechet_mean(&points, &weights)?;
        let cost = |s: &alem::spd::SpdMatrix| -> alem::Result<f64> {
            let mut c = 0.0;
            for (p, w) in points.iter().zip(&weights) {
                c += w * m.distance(s, p)?.powi(2);
            }
            Ok(c)
        };
        let best = cost(&mean)?;
        let mut worst_gain = f64::INFINITY;
        for _ in 0..200 {
            let v = TangentVector::new(mean.clone(), random_sym(&mut rng, 3, 0.05))?;
            worst_gain = worst_gain.min(cost(&m.rie_exp(&v)?)? - best);
        }
        println!("{:>4}: dispersion {best:.6}, smallest increase under perturbation {worst_gain:.3e}", m.name());
    }
    Ok(())
}
