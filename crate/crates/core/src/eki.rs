//! Discrete-time ensemble Kalman inversion with perturbed observations.
//!
//! Each iteration pushes every ensemble member through the forward model,
//! forms the `1/K` sample covariances `C^{ug}` and `C^{gg}` (optionally
//! shrunk by [`crate::sec`]), and moves member `k` by
//! `C^{ug} (C^{gg} + Gamma)^{-1} (y + zeta_k - g_k)` with a fresh draw
//! `zeta_k ~ N(0, Gamma)`. The estimate is the mean of the updated members.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{ensure_dim, Error, Result};
use crate::rng::{self, Purpose};
use crate::sec::{corrected_covariances, SecConfig};
use crate::stats::{self, SampleSet, SpdFactor};

/// A map from `R^N` to `R^M`.
///
/// Implementations must be pure: the ensemble sweep evaluates members
/// concurrently and relies on identical inputs giving identical outputs.
pub trait ForwardModel: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>>;
}

impl<T: ForwardModel + Send + ?Sized> ForwardModel for Box<T> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).evaluate(u)
    }
}

/// Wraps a closure as a forward model.
pub struct FnModel<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        FnModel {
            input_dim,
            output_dim,
            f,
        }
    }
}

impl<F> ForwardModel for FnModel<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("forward model input", self.input_dim, u.len())?;
        let out = (self.f)(u);
        ensure_dim("forward model output", self.output_dim, out.len())?;
        Ok(out)
    }
}

/// Data `y` with Gaussian noise covariance `Gamma`.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    y: DVector<f64>,
    gamma: DMatrix<f64>,
    gamma_is_diagonal: bool,
    factor: SpdFactor,
}

impl MeasurementModel {
    pub fn new(y: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        ensure_dim("noise covariance rows", y.len(), gamma.nrows())?;
        ensure_dim("noise covariance columns", y.len(), gamma.ncols())?;
        if (&gamma - gamma.transpose()).amax() > 1e-12 * gamma.amax() {
            return Err(Error::Argument("noise covariance must be symmetric".into()));
        }
        let factor = SpdFactor::new(&gamma)
            .map_err(|e| e.with_context("noise covariance must be positive definite"))?;
        let n = gamma.nrows();
        let gamma_is_diagonal = (0..n).all(|j| (0..n).all(|i| i == j || gamma[(i, j)] == 0.0));
        Ok(MeasurementModel {
            y,
            gamma,
            gamma_is_diagonal,
            factor,
        })
    }

    pub fn diagonal(y: DVector<f64>, variances: &DVector<f64>) -> Result<Self> {
        ensure_dim("noise variances", y.len(), variances.len())?;
        Self::new(y, DMatrix::from_diagonal(variances))
    }

    pub fn isotropic(y: DVector<f64>, variance: f64) -> Result<Self> {
        let v = DVector::from_element(y.len(), variance);
        Self::diagonal(y, &v)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn gamma_is_diagonal(&self) -> bool {
        self.gamma_is_diagonal
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// `<r, Gamma^{-1} r>` for the residual `r = y - g`.
    pub fn misfit(&self, g: &DVector<f64>) -> Result<f64> {
        ensure_dim("misfit prediction", self.dim(), g.len())?;
        let r = &self.y - g;
        if self.gamma_is_diagonal {
            Ok(r.iter()
                .enumerate()
                .map(|(i, ri)| ri * ri / self.gamma[(i, i)])
                .sum())
        } else {
            Ok(r.dot(&self.factor.solve_vec(&r)))
        }
    }

    /// One draw from `N(0, Gamma)`.
    pub fn sample_noise<R: rand::Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = rng::standard_normals(rng, self.dim());
        if self.gamma_is_diagonal {
            DVector::from_iterator(
                self.dim(),
                z.iter().enumerate().map(|(i, zi)| self.gamma[(i, i)].sqrt() * zi),
            )
        } else {
            DVector::from_vec(self.factor.mul_lower(&z))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ensemble_size: usize,
    pub n_iterations: usize,
    pub rng_seed: u64,
    pub sec: SecConfig,
    pub init_mean: DVector<f64>,
    pub init_variance: DVector<f64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::config("run.ensemble_size", "must be at least 2"));
        }
        if self.n_iterations < 1 {
            return Err(Error::config("run.n_iterations", "must be at least 1"));
        }
        if self.init_mean.len() != self.init_variance.len() {
            return Err(Error::config(
                "ensemble.variance",
                format!(
                    "has {} entries but the mean has {}",
                    self.init_variance.len(),
                    self.init_mean.len()
                ),
            ));
        }
        if let Some(v) = self.init_variance.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::config("ensemble.variance", format!("must be positive, found {v}")));
        }
        self.sec
            .validate()
            .map_err(|e| Error::config("run.sec.exponent_a", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: SampleSet,
    pub iteration: usize,
}

impl Ensemble {
    pub fn new(members: SampleSet) -> Self {
        Ensemble {
            members,
            iteration: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn dim(&self) -> usize {
        self.members.dim()
    }

    pub fn mean(&self) -> DVector<f64> {
        stats::sample_mean(&self.members)
    }
}

/// Draws `K` members with independent `N(mean_j, variance_j)` components.
///
/// Member `k` uses its own seed-derived stream.
pub fn init_ensemble(cfg: &RunConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let n = cfg.init_mean.len();
    let sd = cfg.init_variance.map(f64::sqrt);
    let columns: Vec<DVector<f64>> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(cfg.rng_seed, Purpose::InitialEnsemble, 0, k as u64);
            let z = rng::standard_normals(&mut rng, n);
            DVector::from_iterator(n, (0..n).map(|j| cfg.init_mean[j] + sd[j] * z[j]))
        })
        .collect();
    Ok(Ensemble::new(SampleSet::from_members(&columns)?))
}

/// Evaluates the forward model on every member, in parallel.
pub fn predict<G: ForwardModel + ?Sized>(e: &Ensemble, g: &G) -> Result<SampleSet> {
    ensure_dim("ensemble member", g.input_dim(), e.dim())?;
    let outputs: Vec<Result<DVector<f64>>> = (0..e.size())
        .into_par_iter()
        .map(|k| g.evaluate(&e.members.member(k)))
        .collect();
    let mut columns = Vec::with_capacity(outputs.len());
    for (k, out) in outputs.into_iter().enumerate() {
        let out = out.map_err(|source| Error::ForwardModel {
            member: k,
            source: Box::new(source),
        })?;
        ensure_dim("forward model output", g.output_dim(), out.len())?;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::ForwardModel {
                member: k,
                source: Box::new(Error::Numerical("non-finite prediction".into())),
            });
        }
        columns.push(out);
    }
    SampleSet::from_members(&columns)
}

/// Source of the observation perturbations `zeta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationNoise {
    /// Every member sees the unperturbed data.
    Zero,
    /// Fresh draws from the `(seed, iteration, member)` stream.
    Seeded { seed: u64, iteration: u64 },
}

/// `y + zeta_k` for every member, as the columns of an `M x K` matrix.
pub fn perturbed_observations(m: &MeasurementModel, members: usize, noise: ObservationNoise) -> DMatrix<f64> {
    let columns: Vec<DVector<f64>> = (0..members)
        .into_par_iter()
        .map(|k| match noise {
            ObservationNoise::Zero => m.y().clone(),
            ObservationNoise::Seeded { seed, iteration } => {
                let mut rng = rng::stream(seed, Purpose::Perturbation, iteration, k as u64);
                m.y() + m.sample_noise(&mut rng)
            }
        })
        .collect();
    DMatrix::from_columns(&columns)
}

/// Factors `C^{gg} + Gamma`, retrying once with a small diagonal jitter.
///
/// The corrected `C^{gg}` can be indefinite; when the negative part
/// outweighs `Gamma` the update is reported as a numerical failure.
fn factor_innovation_covariance(c_gg: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Result<SpdFactor> {
    let mut a = c_gg + gamma;
    match SpdFactor::new(&a) {
        Ok(f) => Ok(f),
        Err(first) => {
            let m = a.nrows();
            let jitter = 1e-10 * a.trace() / m as f64;
            log::warn!("innovation covariance factorization failed ({first}); retrying with jitter {jitter:e}");
            for i in 0..m {
                a[(i, i)] += jitter;
            }
            SpdFactor::new(&a).map_err(|e| Error::Numerical(format!("innovation covariance solve failed after jitter: {e}")))
        }
    }
}

/// One analysis step with explicit perturbed observations (`M x K`).
pub fn kalman_update_with(
    e: &Ensemble,
    preds: &SampleSet,
    perturbed: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    sec: &SecConfig,
) -> Result<Ensemble> {
    ensure_dim("prediction count", e.size(), preds.len())?;
    ensure_dim("perturbed observation count", e.size(), perturbed.ncols())?;
    ensure_dim("perturbed observation dim", preds.dim(), perturbed.nrows())?;
    ensure_dim("noise covariance", preds.dim(), gamma.nrows())?;

    let c_ug = stats::cross_covariance(&e.members, preds)?;
    let c_gg = stats::auto_covariance(preds);
    let (c_ug, c_gg) = if sec.is_active() {
        let sd_u = stats::standard_deviations(&e.members);
        let sd_g = c_gg.diagonal().map(f64::sqrt);
        corrected_covariances(&c_ug, &c_gg, &sd_u, &sd_g, sec)?
    } else {
        sec.validate()?;
        (c_ug, c_gg)
    };

    let factor = factor_innovation_covariance(&c_gg, gamma)?;
    let innovations = perturbed - preds.matrix();
    let weights = factor.solve(&innovations)?;
    let updated = e.members.matrix() + &c_ug * weights;
    if updated.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("ensemble update produced non-finite values".into()));
    }
    Ok(Ensemble {
        members: SampleSet::from_matrix(updated)?,
        iteration: e.iteration + 1,
    })
}

/// One analysis step, drawing the perturbations from `noise`.
pub fn kalman_update(
    e: &Ensemble,
    preds: &SampleSet,
    m: &MeasurementModel,
    sec: &SecConfig,
    noise: ObservationNoise,
) -> Result<Ensemble> {
    ensure_dim("prediction dim", m.dim(), preds.dim())?;
    let perturbed = perturbed_observations(m, e.size(), noise);
    kalman_update_with(e, preds, &perturbed, m.gamma(), sec)
}

/// Metrics for one iteration; iteration 0 describes the initial ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub estimate: DVector<f64>,
    pub l1_error: Option<f64>,
    pub data_misfit: f64,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub initial: IterationRecord,
    pub iterations: Vec<IterationRecord>,
    pub final_ensemble: Ensemble,
}

impl RunRecord {
    pub fn last(&self) -> &IterationRecord {
        self.iterations.last().unwrap_or(&self.initial)
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.last().estimate
    }
}

pub(crate) fn l1_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}

/// Drives predict/update for `cfg.n_iterations` steps starting from `ensemble`.
///
/// `metrics` turns an ensemble into an estimate plus its data misfit;
/// `truth` lives in the same space as that estimate.
pub(crate) fn iterate<G, F>(
    mut ensemble: Ensemble,
    model: &G,
    measurement: &MeasurementModel,
    cfg: &RunConfig,
    truth: Option<&DVector<f64>>,
    metrics: F,
) -> Result<RunRecord>
where
    G: ForwardModel + ?Sized,
    F: Fn(&Ensemble) -> Result<(DVector<f64>, f64)>,
{
    let start = Instant::now();
    let record = |ens: &Ensemble, iteration: usize| -> Result<IterationRecord> {
        let (estimate, data_misfit) = metrics(ens)?;
        if let Some(t) = truth {
            ensure_dim("truth", estimate.len(), t.len())?;
        }
        Ok(IterationRecord {
            iteration,
            l1_error: truth.map(|t| l1_distance(&estimate, t)),
            estimate,
            data_misfit,
            wall_time_seconds: start.elapsed().as_secs_f64(),
        })
    };
    let initial = record(&ensemble, 0)?;
    let mut iterations = Vec::with_capacity(cfg.n_iterations);
    for n in 1..=cfg.n_iterations {
        let preds = predict(&ensemble, model)?;
        let noise = ObservationNoise::Seeded {
            seed: cfg.rng_seed,
            iteration: n as u64,
        };
        ensemble = kalman_update(&ensemble, &preds, measurement, &cfg.sec, noise)
            .map_err(|e| e.with_context(format!("iteration {n}")))?;
        iterations.push(record(&ensemble, n)?);
        log::debug!("iteration {n}: misfit {:e}", iterations[n - 1].data_misfit);
    }
    Ok(RunRecord {
        initial,
        iterations,
        final_ensemble: ensemble,
    })
}

/// Runs plain (unregularized) EKI from the configured Gaussian ensemble.
pub fn run<G: ForwardModel + ?Sized>(
    model: &G,
    measurement: &MeasurementModel,
    cfg: &RunConfig,
    truth: Option<&DVector<f64>>,
) -> Result<RunRecord> {
    cfg.validate()?;
    ensure_dim("initial mean", model.input_dim(), cfg.init_mean.len())?;
    ensure_dim("measurement", model.output_dim(), measurement.dim())?;
    let ensemble = init_ensemble(cfg)?;
    iterate(ensemble, model, measurement, cfg, truth, |ens| {
        let mean = ens.mean();
        let misfit = measurement.misfit(&model.evaluate(&mean)?)?;
        Ok((mean, misfit))
    })
}

/// Distance of each updated member from the span of the previous members.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanReport {
    /// Norm of the component of the increment orthogonal to the previous span.
    pub residuals: Vec<f64>,
    /// `residual / |increment|`, 0 for an unchanged member.
    pub relative: Vec<f64>,
    pub in_span: Vec<bool>,
}

impl SpanReport {
    pub fn all_in_span(&self) -> bool {
        self.in_span.iter().all(|b| *b)
    }
}

/// Projects each member's increment onto the column space of `prev`.
///
/// Since every previous member lies in that span, the updated member does
/// too exactly when its increment does.
pub fn spans_previous(prev: &Ensemble, next: &Ensemble, tol: f64) -> Result<SpanReport> {
    ensure_dim("ensemble size", prev.size(), next.size())?;
    ensure_dim("ensemble dim", prev.dim(), next.dim())?;
    let p = prev.members.matrix();
    let svd = p.clone().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let rank_tol = smax * 1e-12 * p.nrows().max(p.ncols()) as f64;
    let basis: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > rank_tol)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();

    let mut report = SpanReport {
        residuals: Vec::with_capacity(prev.size()),
        relative: Vec::with_capacity(prev.size()),
        in_span: Vec::with_capacity(prev.size()),
    };
    for k in 0..prev.size() {
        let inc = next.members.member(k) - prev.members.member(k);
        let mut resid = inc.clone();
        for b in &basis {
            let c = b.dot(&resid);
            resid.axpy(-c, b, 1.0);
        }
        let r = resid.norm();
        let scale = inc.norm();
        let rel = if scale == 0.0 { 0.0 } else { r / scale };
        report.residuals.push(r);
        report.relative.push(rel);
        report.in_span.push(rel <= tol);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn worked_example() -> (Ensemble, FnModel<impl Fn(&DVector<f64>) -> DVector<f64> + Sync>, MeasurementModel) {
        let members = SampleSet::from_members(&[
            DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let model = FnModel::new(4, 1, |u: &DVector<f64>| DVector::from_element(1, u[0]));
        let m = MeasurementModel::isotropic(DVector::from_element(1, 2.0), 7.0 / 9.0).unwrap();
        (Ensemble::new(members), model, m)
    }

    fn cfg(n: usize, k: usize, var: f64) -> RunConfig {
        RunConfig {
            ensemble_size: k,
            n_iterations: 3,
            rng_seed: 42,
            sec: SecConfig::disabled(),
            init_mean: DVector::from_fn(n, |i, _| i as f64),
            init_variance: DVector::from_element(n, var),
        }
    }

    #[test]
    fn tiny_variance_collapses_to_mean() {
        let c = cfg(3, 4, 1e-300);
        let e = init_ensemble(&c).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(e.members.member(k), c.init_mean, epsilon = 1e-140);
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let c = cfg(5, 6, 0.1);
        assert_eq!(init_ensemble(&c).unwrap(), init_ensemble(&c).unwrap());
        let mut other = c.clone();
        other.rng_seed = 43;
        assert_ne!(init_ensemble(&c).unwrap(), init_ensemble(&other).unwrap());
    }

    #[test]
    fn large_ensemble_covariance_matches_target() {
        let mut c = cfg(2, 10_000, 1.0);
        c.init_variance = DVector::from_vec(vec![0.5, 2.0]);
        let e = init_ensemble(&c).unwrap();
        let cov = stats::auto_covariance(&e.members);
        assert!((cov[(0, 0)] - 0.5).abs() < 0.05 * 0.5);
        assert!((cov[(1, 1)] - 2.0).abs() < 0.05 * 2.0);
        assert!(cov[(0, 1)].abs() < 0.05);
    }

    #[test]
    fn invalid_run_configs() {
        let mut c = cfg(2, 1, 1.0);
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
        c.ensemble_size = 3;
        c.n_iterations = 0;
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
        c.n_iterations = 1;
        c.init_variance[0] = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn predict_worked_example_and_identity() {
        let (e, model, _) = worked_example();
        let g = predict(&e, &model).unwrap();
        assert_eq!(g.matrix().as_slice(), &[1.0, 0.0, 0.0]);
        let id = FnModel::new(4, 4, |u: &DVector<f64>| u.clone());
        assert_eq!(predict(&e, &id).unwrap(), e.members);
    }

    #[test]
    fn predict_linear_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(3, 5, |_, _| StandardNormal.sample(&mut rng));
        let u = DMatrix::from_fn(5, 7, |_, _| StandardNormal.sample(&mut rng));
        let a2 = a.clone();
        let model = FnModel::new(5, 3, move |x: &DVector<f64>| &a2 * x);
        let e = Ensemble::new(SampleSet::from_matrix(u.clone()).unwrap());
        let g = predict(&e, &model).unwrap();
        assert!((g.matrix() - &a * &u).amax() < 1e-13);
    }

    struct Failing;
    impl ForwardModel for Failing {
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
            if u[0] > 1.5 {
                Err(Error::Numerical("boom".into()))
            } else {
                Ok(u.clone())
            }
        }
    }

    #[test]
    fn predict_reports_failing_member() {
        let e = Ensemble::new(SampleSet::from_matrix(DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 2.0, 3.0])).unwrap());
        match predict(&e, &Failing) {
            Err(Error::ForwardModel { member, .. }) => assert_eq!(member, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn worked_example_increment_is_corrected_covariance() {
        let (e, model, m) = worked_example();
        let g = predict(&e, &model).unwrap();
        let next = kalman_update(&e, &g, &m, &SecConfig::power(1.0), ObservationNoise::Zero).unwrap();
        let inc = next.members.member(0) - e.members.member(0);
        let expected = [2.0 / 9.0, -(3.0f64.sqrt()) / 6.0, -1.0 / 18.0, -1.0 / 18.0];
        for (x, ex) in inc.iter().zip(expected) {
            assert_abs_diff_eq!(*x, ex, epsilon = 1e-12);
        }
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn zero_innovation_leaves_ensemble() {
        let (e, model, _) = worked_example();
        let g = predict(&e, &model).unwrap();
        let next = kalman_update_with(&e, &g, g.matrix(), &DMatrix::identity(1, 1), &SecConfig::power(1.0)).unwrap();
        assert_eq!(next.members, e.members);
    }

    #[test]
    fn linear_update_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, mdim, k) = (6, 4, 8);
        let a = DMatrix::from_fn(mdim, n, |_, _| StandardNormal.sample(&mut rng));
        let u = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(mdim, |_, _| StandardNormal.sample(&mut rng));
        let gamma = DMatrix::from_diagonal(&DVector::from_element(mdim, 0.3));
        let a2 = a.clone();
        let model = FnModel::new(n, mdim, move |x: &DVector<f64>| &a2 * x);
        let m = MeasurementModel::new(y.clone(), gamma.clone()).unwrap();
        let e = Ensemble::new(SampleSet::from_matrix(u.clone()).unwrap());
        let g = predict(&e, &model).unwrap();
        let next = kalman_update(&e, &g, &m, &SecConfig::disabled(), ObservationNoise::Zero).unwrap();

        // oracle: explicit means, loops and a dense inverse
        let gm = &a * &u;
        let ubar = u.column_mean();
        let gbar = gm.column_mean();
        let mut cug = DMatrix::zeros(n, mdim);
        let mut cgg = DMatrix::zeros(mdim, mdim);
        for j in 0..k {
            let du = u.column(j) - &ubar;
            let dg = gm.column(j) - &gbar;
            cug += &du * dg.transpose();
            cgg += &dg * dg.transpose();
        }
        cug /= k as f64;
        cgg /= k as f64;
        let gain = &cug * (cgg + &gamma).try_inverse().unwrap();
        for j in 0..k {
            let expected = u.column(j) + &gain * (&y - gm.column(j));
            assert!((next.members.member(j) - expected).amax() < 1e-10);
        }
    }

    #[test]
    fn span_checks_on_worked_example() {
        let (e, model, m) = worked_example();
        let g = predict(&e, &model).unwrap();
        assert!(spans_previous(&e, &e, 1e-10).unwrap().all_in_span());

        let sec = kalman_update(&e, &g, &m, &SecConfig::power(1.0), ObservationNoise::Zero).unwrap();
        let rep = spans_previous(&e, &sec, 0.01).unwrap();
        assert!(!rep.in_span[0]);
        assert!(rep.relative[0] > 0.01);

        let std = kalman_update(&e, &g, &m, &SecConfig::power(0.0), ObservationNoise::Zero).unwrap();
        let rep = spans_previous(&e, &std, 1e-10).unwrap();
        assert!(rep.all_in_span(), "{rep:?}");
        assert!(rep.relative.iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn perturbations_follow_gamma() {
        let gamma = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let m = MeasurementModel::new(DVector::zeros(2), gamma.clone()).unwrap();
        assert!(!m.gamma_is_diagonal());
        let y = perturbed_observations(&m, 20_000, ObservationNoise::Seeded { seed: 9, iteration: 1 });
        let s = SampleSet::from_matrix(y).unwrap();
        let cov = stats::auto_covariance(&s);
        assert!((cov - gamma).amax() < 0.06);
    }

    #[test]
    fn misfit_weights_by_gamma() {
        let m = MeasurementModel::diagonal(
            DVector::from_vec(vec![1.0, 2.0]),
            &DVector::from_vec(vec![0.5, 4.0]),
        )
        .unwrap();
        assert_abs_diff_eq!(m.misfit(&DVector::zeros(2)).unwrap(), 2.0 + 1.0, epsilon = 1e-15);
        let full = MeasurementModel::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
        )
        .unwrap();
        // inverse is [[2,-1],[-1,2]]/3
        assert_abs_diff_eq!(full.misfit(&DVector::zeros(2)).unwrap(), (2.0 - 4.0 + 8.0) / 3.0, epsilon = 1e-14);
        assert!(MeasurementModel::isotropic(DVector::zeros(2), -1.0).is_err());
    }

    #[test]
    fn vanishing_gain_barely_moves() {
        let model = FnModel::new(3, 3, |u: &DVector<f64>| u.clone());
        let m = MeasurementModel::isotropic(DVector::from_element(3, 5.0), 1e6).unwrap();
        let mut c = cfg(3, 2, 0.1);
        c.init_mean = DVector::zeros(3);
        c.n_iterations = 1;
        let rec = run(&model, &m, &c, None).unwrap();
        assert!((rec.estimate() - &rec.initial.estimate).amax() < 1e-3);
        assert_eq!(rec.iterations.len(), 1);
    }
}
