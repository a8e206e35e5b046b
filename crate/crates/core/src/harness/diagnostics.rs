//! Sampling-error and subspace diagnostics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::eki::{self, Ensemble, FnModel, ForwardModel, MeasurementModel, ObservationNoise, SpanReport};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::sec::SecConfig;
use crate::stats::SampleSet;

use super::config::ExperimentConfig;
use super::Experiment;

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

/// Monte-Carlo standard deviation of the sample correlation of `k` draws
/// from a standard bivariate normal with correlation `true_r`.
pub fn correlation_sampling_stddev(true_r: f64, k: usize, n_trials: usize, seed: u64) -> Result<f64> {
    if !(true_r.abs() < 1.0) {
        return Err(Error::Argument(format!("true correlation must lie in (-1, 1), got {true_r}")));
    }
    if k < 3 || n_trials < 2 {
        return Err(Error::Argument(format!("need k >= 3 and at least 2 trials (k={k}, trials={n_trials})")));
    }
    let c = (1.0 - true_r * true_r).sqrt();
    let samples: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, Purpose::Diagnostic, (t >> 32) as u64, (t & 0xffff_ffff) as u64);
            let z = rng::standard_normals(&mut rng, 2 * k);
            let x = &z[..k];
            let y: Vec<f64> = x.iter().zip(&z[k..]).map(|(a, b)| true_r * a + c * b).collect();
            pearson(x, &y)
        })
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

/// A single-update scenario for checking whether the corrected update
/// leaves the span of the previous ensemble.
pub struct SubspaceCase {
    pub name: String,
    pub ensemble: Ensemble,
    pub model: Box<dyn ForwardModel + Send>,
    pub measurement: MeasurementModel,
    pub noise: ObservationNoise,
}

fn first_component_model() -> Box<dyn ForwardModel + Send> {
    Box::new(FnModel::new(4, 1, |u: &DVector<f64>| DVector::from_element(1, u[0])))
}

impl SubspaceCase {
    /// Three members in `R^4`, `G(u) = u_1`, `y = 2`, noise variance `7/9`,
    /// unperturbed data.
    pub fn worked_example() -> Self {
        let members = SampleSet::from_members(&[
            DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]),
        ])
        .expect("static ensemble");
        SubspaceCase {
            name: "r4-worked-example".into(),
            ensemble: Ensemble::new(members),
            model: first_component_model(),
            measurement: MeasurementModel::isotropic(DVector::from_element(1, 2.0), 7.0 / 9.0).expect("spd"),
            noise: ObservationNoise::Zero,
        }
    }

    /// Every component of a member carries the same value, so the
    /// correlation of `u_l` with `g` does not depend on `l`.
    pub fn row_independent_example() -> Self {
        let members = DMatrix::from_fn(4, 3, |_, k| [1.0, 0.0, -0.5][k]);
        SubspaceCase {
            name: "row-independent".into(),
            ensemble: Ensemble::new(SampleSet::from_matrix(members).expect("static ensemble")),
            model: first_component_model(),
            measurement: MeasurementModel::isotropic(DVector::from_element(1, 2.0), 7.0 / 9.0).expect("spd"),
            noise: ObservationNoise::Zero,
        }
    }

    /// Initial ensemble and model of an experiment config; requires `K < N`.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let exp = Experiment::prepare(cfg)?;
        let n = exp.model.input_dim();
        if cfg.run.ensemble_size >= n {
            return Err(Error::config(
                "run.ensemble_size",
                format!("subspace check needs K < N (K={}, N={n})", cfg.run.ensemble_size),
            ));
        }
        let ensemble = eki::init_ensemble(&exp.run)?;
        Ok(SubspaceCase {
            name: format!("{:?}", cfg.experiment).to_lowercase(),
            ensemble,
            model: exp.model,
            measurement: exp.measurement,
            noise: ObservationNoise::Seeded {
                seed: cfg.run.rng_seed,
                iteration: 1,
            },
        })
    }
}

/// Runs one corrected update with exponent `a` and projects each member's
/// increment onto the span of the previous ensemble.
pub fn check_subspace_violation(case: &SubspaceCase, a: f64, tol: f64) -> Result<SpanReport> {
    let preds = eki::predict(&case.ensemble, case.model.as_ref())?;
    let next = eki::kalman_update(&case.ensemble, &preds, &case.measurement, &SecConfig::power(a), case.noise)?;
    eki::spans_previous(&case.ensemble, &next, tol)
}
