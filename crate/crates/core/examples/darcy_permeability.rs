//! Log-permeability inversion from pressure samples on a 25x25 mesh.
//!
//! With the tiny observation variance of this problem the corrected
//! prediction covariance can lose definiteness; the run then stops with a
//! numerical error, which this example reports instead of hiding.

use ekisec::harness::{preset, Experiment};
use ekisec::sec::SecConfig;

fn main() -> ekisec::Result<()> {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    for sec in [SecConfig::disabled(), SecConfig::power(0.2)] {
        let mut cfg = preset("darcy")?;
        cfg.run.sec = sec;
        cfg.run.n_iterations = iterations;
        let exp = Experiment::prepare(&cfg)?;
        match exp.execute() {
            Ok(record) => println!(
                "a={:<4} misfit {:.3e} -> {:.3e}, l1 error {:.2} -> {:.2}",
                sec.exponent_a,
                record.initial.data_misfit,
                record.last().data_misfit,
                record.initial.l1_error.unwrap_or(f64::NAN),
                record.last().l1_error.unwrap_or(f64::NAN),
            ),
            Err(e) => println!("a={:<4} stopped: {e}", sec.exponent_a),
        }
    }
    Ok(())
}
