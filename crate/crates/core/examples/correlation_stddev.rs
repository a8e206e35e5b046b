//! Spread of sample correlations for several true correlations and
//! ensemble sizes, next to the large-sample value (1 - r^2)/sqrt(K - 1).

use ekisec::harness::correlation_sampling_stddev;

fn main() -> ekisec::Result<()> {
    println!("{:>5} {:>5} {:>9} {:>11}", "r", "K", "stddev", "asymptotic");
    for k in [10, 30, 100] {
        for r in [0.0, 0.3, 0.6, 0.9, 0.99] {
            let sd = correlation_sampling_stddev(r, k, 20_000, 2021)?;
            let reference = (1.0 - r * r) / ((k - 1) as f64).sqrt();
            println!("{r:>5} {k:>5} {sd:>9.4} {reference:>11.4}");
        }
    }
    Ok(())
}
