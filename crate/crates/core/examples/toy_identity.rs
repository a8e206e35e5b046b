//! Identity model with N = 100 unknowns and K = 50 members: compares the
//! worst-component error of plain EKI and power-law SEC per iteration.

use ekisec::harness::{preset, Experiment};
use ekisec::sec::SecConfig;

fn main() -> ekisec::Result<()> {
    let mut errors = Vec::new();
    for sec in [SecConfig::disabled(), SecConfig::power(1.0)] {
        let mut cfg = preset("toy")?;
        cfg.run.sec = sec;
        let exp = Experiment::prepare(&cfg)?;
        let record = exp.execute()?;
        errors.push(
            record
                .iterations
                .iter()
                .map(|it| (&it.estimate - &exp.truth).amax())
                .collect::<Vec<_>>(),
        );
    }
    println!("iter  max|u-1| plain  max|u-1| SEC(a=1)");
    for (i, (plain, sec)) in errors[0].iter().zip(&errors[1]).enumerate() {
        println!("{:>4}  {plain:>14.4}  {sec:>17.4}", i + 1);
    }
    Ok(())
}
