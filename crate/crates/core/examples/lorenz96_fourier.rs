//! Recovering a Lorenz-96 initial state from Fourier coefficients of the
//! state at t = 0.5, with a small ensemble with and without SEC.

use ekisec::harness::{preset, Experiment};
use ekisec::sec::SecConfig;

fn main() -> ekisec::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    for sec in [SecConfig::disabled(), SecConfig::power(1.0)] {
        let mut cfg = preset("lorenz96")?;
        cfg.run.ensemble_size = k;
        cfg.run.sec = sec;
        let record = Experiment::prepare(&cfg)?.execute()?;
        let l1: Vec<String> = record
            .iterations
            .iter()
            .step_by(5)
            .map(|it| format!("{:.1}", it.l1_error.unwrap_or(f64::NAN)))
            .collect();
        println!("K={k} a={:<4} l1 every 5 iterations: {}", sec.exponent_a, l1.join(" "));
    }
    Ok(())
}
