//! Closed-form differentials of mlog, mgexp and the Cholesky logarithm
//! against central differences, and convergence of the series form.

use alem::differentials::{d_cln, d_mgexp, d_mgexp_series, d_mlog, fd_differential, relative_error, DEFAULT_FD_STEP};
use alem::spd::random::{random_base_vector, random_spd, random_sym};
use alem::spd::{cln, mgexp, mlog, SpdMatrix, SymMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> alem::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 4;
    let s = random_spd(&mut rng, n, 20.0);
    let v = random_sym(&mut rng, n, 1.0);
    let alpha = random_base_vector(&mut rng, n);
    let h = DEFAULT_FD_STEP;

    let fd = fd_differential(|m| Ok(mlog(&SpdMatrix::from_matrix(m)?, &alpha)?.into_matrix()), s.as_matrix(), v.as_matrix(), h)?;
    println!("d_mlog   vs FD  {:.2e}", relative_error(d_mlog(&s, &v, &alpha)?.as_matrix(), &fd));

    let x = mlog(&s, &alpha)?;
    let fd = fd_differential(|m| Ok(mgexp(&SymMatrix::from_matrix(m)?, &alpha)?.as_matrix().clone()), x.as_matrix(), v.as_matrix(), h)?;
    let closed = d_mgexp(&x, &v, &alpha)?;
    println!("d_mgexp  vs FD  {:.2e}", relative_error(closed.as_matrix(), &fd));

    let fd = fd_differential(|m| Ok(cln(&SpdMatrix::from_matrix(m)?)?.into_matrix()), s.as_matrix(), v.as_matrix(), h)?;
    println!("d_cln    vs FD  {:.2e}", relative_error(d_cln(&s, &v)?.as_matrix(), &fd));

    for k in [2, 5, 10, 20, 30] {
        let series = d_mgexp_series(&x, &v, &alpha, k)?;
        println!("series K={k:<2}    {:.2e}", relative_error(closed.as_matrix(), &series));
    }
    Ok(())
}
