//! With p = 2 the regularized problem is Tikhonov least squares, so a large
//! ensemble should land on the closed-form minimiser.

use ekisec::eki::{MeasurementModel, RunConfig};
use ekisec::lp::{lp_run, RegularizationConfig};
use ekisec::models::LinearModel;
use ekisec::sec::SecConfig;
use nalgebra::{DMatrix, DVector};

fn main() -> ekisec::Result<()> {
    let (n, m, variance, lambda) = (8, 5, 0.05, 0.5);
    let model = LinearModel::gaussian(m, n, 3);
    let a = model.matrix().clone();
    let y = &a * DVector::from_fn(n, |i, _| (i as f64 * 0.9).sin());
    let data = MeasurementModel::isotropic(y.clone(), variance)?;

    let normal = a.transpose() * &a / variance + DMatrix::identity(n, n) * lambda;
    let closed_form = normal
        .cholesky()
        .expect("normal matrix is SPD")
        .solve(&(a.transpose() * &y / variance));

    for k in [50, 500, 2000] {
        let cfg = RunConfig {
            ensemble_size: k,
            n_iterations: 60,
            rng_seed: 7,
            sec: SecConfig::disabled(),
            init_mean: DVector::zeros(n),
            init_variance: DVector::from_element(n, 1.0),
        };
        let record = lp_run(&model, &data, RegularizationConfig { p: 2.0, lambda }, &cfg, None)?;
        let gap = (record.estimate() - &closed_form).norm() / closed_form.norm();
        println!("K={k:<5} relative distance to closed form {:.2}%", 100.0 * gap);
    }
    Ok(())
}
