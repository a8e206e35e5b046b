//! Sparse recovery from 30 Gaussian measurements of a 100-dimensional
//! vector with l1-regularized EKI, with and without SEC.

use ekisec::harness::{preset, Experiment};
use ekisec::sec::SecConfig;
use nalgebra::DVector;

fn largest(v: &DVector<f64>, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    idx.truncate(n);
    idx.sort_unstable();
    idx
}

fn main() -> ekisec::Result<()> {
    for (label, sec) in [("plain", SecConfig::disabled()), ("SEC a=1", SecConfig::power(1.0))] {
        let mut cfg = preset("compressive_sensing")?;
        cfg.run.sec = sec;
        let exp = Experiment::prepare(&cfg)?;
        let record = exp.execute()?;
        let last = record.last();
        println!(
            "{label:<8} final l1 error {:.3}, data misfit {:.3e}",
            last.l1_error.unwrap_or(f64::NAN),
            last.data_misfit
        );
        println!("         truth support {:?}", largest(&exp.truth, 4));
        println!("         estimate top-4 {:?}", largest(record.estimate(), 4));
    }
    Ok(())
}
