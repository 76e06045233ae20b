//! Distances, exponential and logarithmic maps, transport and geodesics
//! under the three pullback metrics.

use alem::geometry::{PullbackGeometry, PullbackMetric, TangentVector};
use alem::spd::{BaseVector, SpdMatrix, SymMatrix};

fn main() -> alem::Result<()> {
    let a = SpdMatrix::from_row_major(3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5])?;
    let b = SpdMatrix::from_row_major(3, &[1.0, -0.2, 0.0, -0.2, 3.0, 0.4, 0.0, 0.4, 2.0])?;
    let v = TangentVector::new(a.clone(), SymMatrix::from_row_major(3, &[0.1, 0.0, 0.2, 0.0, -0.3, 0.0, 0.2, 0.0, 0.4])?)?;
    let metrics = [
        PullbackMetric::Lem,
        PullbackMetric::Lcm,
        PullbackMetric::Alem(BaseVector::from_alpha(&[2.0, 5.0, 10.0])?),
    ];
    for m in &metrics {
        let d = m.distance(&a, &b)?;
        let log = m.rie_log(&a, &b)?;
        let back = m.rie_exp(&log)?;
        let moved = m.parallel_transport(&v, &b)?;
        let mid = m.geodesic(&a, &b, 0.5)?;
        println!("{}", m.name());
        println!("  distance            {d:.6}");
        println!("  exp(log) error      {:.2e}", (back.as_matrix() - b.as_matrix()).norm());
        println!(
            "  |V| before/after    {:.6} / {:.6}",
            m.metric_tensor(&a, &v.value, &v.value)?.sqrt(),
            m.metric_tensor(&b, &moved.value, &moved.value)?.sqrt()
        );
        println!("  midpoint distances  {:.6} {:.6}", m.distance(&a, &mid)?, m.distance(&mid, &b)?);
    }
    Ok(())
}
