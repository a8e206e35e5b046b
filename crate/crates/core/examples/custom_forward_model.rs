//! Plugging in a user-defined nonlinear model: recover the two parameters of
//! an exponential decay from noisy samples.

use ekisec::eki::{run, FnModel, ForwardModel, MeasurementModel, RunConfig};
use ekisec::sec::SecConfig;
use nalgebra::DVector;

const TIMES: [f64; 8] = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0];

fn decay(theta: &DVector<f64>) -> DVector<f64> {
    let (amplitude, rate) = (theta[0], theta[1]);
    DVector::from_iterator(TIMES.len(), TIMES.iter().map(|t| amplitude * (-rate * t).exp()))
}

fn main() -> ekisec::Result<()> {
    let model = FnModel::new(2, TIMES.len(), decay);
    let truth = DVector::from_vec(vec![2.0, 0.7]);
    let wobble = DVector::from_fn(TIMES.len(), |i, _| 0.01 * (i as f64 * 2.3).sin());
    let y = model.evaluate(&truth)? + wobble;
    let data = MeasurementModel::isotropic(y, 1e-4)?;

    let cfg = RunConfig {
        ensemble_size: 40,
        n_iterations: 15,
        rng_seed: 3,
        sec: SecConfig::power(0.5),
        init_mean: DVector::from_vec(vec![1.0, 1.0]),
        init_variance: DVector::from_vec(vec![0.5, 0.2]),
    };
    let record = run(&model, &data, &cfg, Some(&truth))?;
    for it in record.iterations.iter().step_by(3) {
        println!(
            "iteration {:>2}: amplitude {:.4} rate {:.4} misfit {:.3e}",
            it.iteration, it.estimate[0], it.estimate[1], it.data_misfit
        );
    }
    Ok(())
}
