//! Runs the finite-difference gradient suite and prints its table.

use alem::gradcheck::{format_table, run_suite, GradCheckOptions};

fn main() -> alem::Result<()> {
    let results = run_suite(&GradCheckOptions::default())?;
    print!("{}", format_table(&results));
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(())
}
