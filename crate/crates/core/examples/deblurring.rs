//! Deblurring a 32x32 synthetic image. Writes truth, blurred measurement and
//! estimate as PGM files into a directory given as the first argument
//! (default: a `deblurring` folder under the system temp directory).

use std::path::PathBuf;

use ekisec::harness::{preset, psnr, run_experiment};

fn main() -> ekisec::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("deblurring"));
    let mut cfg = preset("deblurring")?;
    cfg.output_dir = Some(out);
    let outcome = run_experiment(&cfg)?;
    println!("PSNR of blurred data: {:.2} dB", psnr(&outcome.data, &outcome.truth));
    println!("PSNR of estimate:     {:.2} dB", psnr(outcome.record.estimate(), &outcome.truth));
    for p in &outcome.written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
