//! Acceptance run: one PASS/FAIL line per criterion with the measured
//! quantities. Criteria are reported, not asserted; set
//! `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit status.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ekisec::eki::{self, Ensemble, ForwardModel, MeasurementModel, ObservationNoise, RunConfig};
use ekisec::harness::{self, preset, Experiment, SubspaceCase};
use ekisec::lp::{self, augment, psi, xi, RegularizationConfig};
use ekisec::models::{self, EllipticProblem, FaceCondition, LinearModel};
use ekisec::rng::{self, Purpose};
use ekisec::sec::{corrected_covariances, SecConfig};
use ekisec::stats::{self, corr_decompose};
use ekisec::Result;
use nalgebra::{DMatrix, DVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn top_indices(v: &DVector<f64>, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));
    idx.truncate(n);
    idx.sort_unstable();
    idx
}

fn with_sec(name: &str, k: usize, sec: SecConfig) -> Result<ekisec::harness::ExperimentConfig> {
    let mut cfg = preset(name)?;
    cfg.run.ensemble_size = k;
    cfg.run.sec = sec;
    Ok(cfg)
}

fn worked_example() -> Result<Outcome> {
    let start = Instant::now();
    let case = SubspaceCase::worked_example();
    let preds = eki::predict(&case.ensemble, case.model.as_ref())?;
    let c_ug = stats::cross_covariance(&case.ensemble.members, &preds)?;
    let c_gg = stats::auto_covariance(&preds);
    let sd_u = stats::standard_deviations(&case.ensemble.members);
    let sd_g = stats::standard_deviations(&preds);
    let r = corr_decompose(&c_ug, &sd_u, &sd_g)?.r;
    let (c_sec, _) = corrected_covariances(&c_ug, &c_gg, &sd_u, &sd_g, &SecConfig::power(1.0))?;
    let next = eki::kalman_update(&case.ensemble, &preds, &case.measurement, &SecConfig::power(1.0), ObservationNoise::Zero)?;
    let increment = next.members.member(0) - case.ensemble.members.member(0);
    let elapsed = start.elapsed();

    let s3 = 3f64.sqrt();
    let errs = [
        max_abs_diff(c_ug.as_slice(), &[2.0 / 9.0, -1.0 / 3.0, -1.0 / 9.0, -1.0 / 9.0]),
        (c_gg[(0, 0)] - 2.0 / 9.0).abs(),
        max_abs_diff(r.as_slice(), &[1.0, -s3 / 2.0, -0.5, -0.5]),
        max_abs_diff(c_sec.as_slice(), &[2.0 / 9.0, -s3 / 6.0, -1.0 / 18.0, -1.0 / 18.0]),
        max_abs_diff(increment.as_slice(), c_sec.as_slice()),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < 1e-12 && elapsed < Duration::from_millis(1),
        format!("max deviation {worst:.2e} over C_ug, C_gg, R, C_ug_sec, increment; {elapsed:?}"),
    )
}

fn subspace_pair() -> Result<Outcome> {
    let start = Instant::now();
    let case = SubspaceCase::worked_example();
    let sec = harness::check_subspace_violation(&case, 1.0, 0.01)?;
    let plain = harness::check_subspace_violation(&case, 0.0, 1e-10)?;
    let elapsed = start.elapsed();
    let plain_worst = plain.residuals.iter().copied().fold(0.0, f64::max);
    outcome(
        sec.relative[0] > 0.01 && plain_worst < 1e-10 && elapsed < Duration::from_millis(1),
        format!(
            "a=1 member-1 residual {:.4} (relative to increment); a=0 max residual {plain_worst:.2e}; {elapsed:?}",
            sec.relative[0]
        ),
    )
}

fn sec_off_equivalence() -> Result<Outcome> {
    let run = |sec: SecConfig| -> Result<Ensemble> {
        let mut cfg = with_sec("toy", 20, sec)?;
        cfg.run.n_iterations = 5;
        Ok(Experiment::prepare(&cfg)?.execute()?.final_ensemble)
    };
    let on = run(SecConfig {
        enabled: true,
        exponent_a: 0.0,
    })?;
    let off = run(SecConfig::disabled())?;
    let diff = max_abs_diff(on.members.matrix().as_slice(), off.members.matrix().as_slice());
    outcome(diff <= 1e-13, format!("max member difference {diff:.2e}"))
}

fn toy() -> Result<Outcome> {
    let start = Instant::now();
    let err10 = |sec: SecConfig| -> Result<f64> {
        let exp = Experiment::prepare(&with_sec("toy", 50, sec)?)?;
        let rec = exp.execute()?;
        Ok((&rec.iterations[9].estimate - &exp.truth).amax())
    };
    let with = err10(SecConfig::power(1.0))?;
    let without = err10(SecConfig::disabled())?;
    let elapsed = start.elapsed();
    outcome(
        with < 0.05 && without >= 0.05 && elapsed < Duration::from_secs(5),
        format!("max |u_i - 1| at iteration 10: SEC {with:.4}, no SEC {without:.4} (bound 0.05); {elapsed:.1?}"),
    )
}

fn compressive_sensing() -> Result<Outcome> {
    let start = Instant::now();
    let exp_sec = Experiment::prepare(&with_sec("compressive_sensing", 50, SecConfig::power(1.0))?)?;
    let rec_sec = exp_sec.execute()?;
    let exp_plain = Experiment::prepare(&with_sec("compressive_sensing", 50, SecConfig::disabled())?)?;
    let rec_plain = exp_plain.execute()?;
    let elapsed = start.elapsed();
    let truth_top = top_indices(&exp_sec.truth, 3);
    let est_top = top_indices(&rec_sec.iterations[14].estimate, 3);
    let (l1_sec, l1_plain) = (rec_sec.last().l1_error.unwrap(), rec_plain.last().l1_error.unwrap());
    outcome(
        truth_top == est_top && l1_sec < l1_plain && elapsed < Duration::from_secs(30),
        format!(
            "top-3 truth {truth_top:?} vs SEC estimate at iteration 15 {est_top:?}; final l1 SEC {l1_sec:.3} vs no SEC {l1_plain:.3}; {elapsed:.1?}"
        ),
    )
}

fn lorenz96() -> Result<Outcome> {
    let start = Instant::now();
    let err = |k: usize, sec: SecConfig| -> Result<f64> {
        let rec = Experiment::prepare(&with_sec("lorenz96", k, sec)?)?.execute()?;
        Ok(rec.last().l1_error.unwrap())
    };
    let large = err(1000, SecConfig::disabled())?;
    let small_sec = err(30, SecConfig::power(1.0))?;
    let small_plain = err(30, SecConfig::disabled())?;
    let elapsed = start.elapsed();
    let ordering = large < small_sec && small_sec < small_plain;
    let magnitude = small_sec <= 2.0 * large && small_plain > 2.0 * small_sec;
    outcome(
        ordering && magnitude && elapsed < Duration::from_secs(600),
        format!(
            "final l1: K=1000 {large:.2}, K=30 SEC {small_sec:.2}, K=30 no SEC {small_plain:.2}; ordering {ordering}, magnitude {magnitude}; {elapsed:.1?}"
        ),
    )
}

fn deblurring() -> Result<Outcome> {
    let start = Instant::now();
    let exp = Experiment::prepare(&with_sec("deblurring", 50, SecConfig::power(3.0))?)?;
    let psnr_sec = harness::psnr(exp.execute()?.estimate(), &exp.truth);
    let psnr_blurred = harness::psnr(exp.measurement.y(), &exp.truth);
    let plain = Experiment::prepare(&with_sec("deblurring", 50, SecConfig::disabled())?)?;
    let psnr_plain = harness::psnr(plain.execute()?.estimate(), &plain.truth);
    let elapsed = start.elapsed();
    outcome(
        psnr_sec > psnr_blurred && psnr_sec > psnr_plain && elapsed < Duration::from_secs(300),
        format!(
            "PSNR dB: SEC {psnr_sec:.2}, blurred measurement {psnr_blurred:.2}, no SEC {psnr_plain:.2}; {elapsed:.1?}"
        ),
    )
}

/// Max-norm error of the elliptic solver against
/// `p = sin(pi x) sin(pi y) + x + 2y` with `k = 1 + xy/2`.
fn manufactured_error(n: usize) -> Result<f64> {
    let p = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin() + x + 2.0 * y;
    let px = |x: f64, y: f64| PI * (PI * x).cos() * (PI * y).sin() + 1.0;
    let py = |x: f64, y: f64| PI * (PI * x).sin() * (PI * y).cos() + 2.0;
    let lap = |x: f64, y: f64| -2.0 * PI * PI * (PI * x).sin() * (PI * y).sin();
    let k = |x: f64, y: f64| 1.0 + 0.5 * x * y;
    let f = |x: f64, y: f64| -(k(x, y) * lap(x, y) + 0.5 * y * px(x, y) + 0.5 * x * py(x, y));
    let problem = EllipticProblem::sampled(
        n,
        f,
        |y| FaceCondition::Dirichlet(p(0.0, y)),
        |y| FaceCondition::Dirichlet(p(1.0, y)),
        |x| FaceCondition::Dirichlet(p(x, 0.0)),
        |x| FaceCondition::Dirichlet(p(x, 1.0)),
    );
    let h = 1.0 / n as f64;
    let c = |i: usize| (i as f64 + 0.5) * h;
    let kc: Vec<f64> = (0..n * n).map(|m| k(c(m % n), c(m / n))).collect();
    let sol = models::solve_elliptic(&kc, &problem)?;
    Ok((0..n * n)
        .map(|m| (sol.values[m] - p(c(m % n), c(m / n))).abs())
        .fold(0.0, f64::max))
}

fn darcy() -> Result<Outcome> {
    let start = Instant::now();
    let errs = [manufactured_error(10)?, manufactured_error(20)?, manufactured_error(40)?];
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let second_order = ratios.iter().all(|r| (3.4..=4.6).contains(r));

    let misfits = |sec: SecConfig| -> Result<(f64, f64)> {
        let rec = Experiment::prepare(&with_sec("darcy", 300, sec)?)?.execute()?;
        Ok((rec.initial.data_misfit, rec.last().data_misfit))
    };
    let plain = misfits(SecConfig::disabled());
    let sec = misfits(SecConfig::power(0.2));
    let elapsed = start.elapsed();
    let describe = |r: &Result<(f64, f64)>| match r {
        Ok((m0, m1)) => format!("misfit {m0:.3e} -> {m1:.3e} ({:.1}x)", m0 / m1),
        Err(e) => format!("failed: {e}"),
    };
    let pass = match (&sec, &plain) {
        (Ok((s0, s1)), Ok((_, p1))) => second_order && s0 / s1 >= 10.0 && s1 <= p1,
        _ => false,
    };
    outcome(
        pass && elapsed < Duration::from_secs(1200),
        format!(
            "manufactured error ratios {:.3}, {:.3}; a=0.2 {}; no SEC {}; {elapsed:.1?}",
            ratios[0],
            ratios[1],
            describe(&sec),
            describe(&plain)
        ),
    )
}

fn correlation_stddev() -> Result<Outcome> {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [10usize, 40, 160] {
        let grid: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 0.99]
            .iter()
            .map(|r| harness::correlation_sampling_stddev(*r, k, 100_000, 2021))
            .collect::<Result<_>>()?;
        let reference = 1.0 / ((k - 1) as f64).sqrt();
        let close = (grid[0] - reference).abs() < 0.01;
        let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
        pass &= close && decreasing;
        parts.push(format!(
            "K={k}: {:.4} vs {reference:.4}, decreasing {decreasing}",
            grid[0]
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        pass && elapsed < Duration::from_secs(30),
        format!("{}; {elapsed:.1?}", parts.join("; ")),
    )
}

fn lp_machinery() -> Result<Outcome> {
    let mut rng = rng::stream(11, Purpose::Diagnostic, 0, 0);
    let mut round_trip: f64 = 0.0;
    for p in [0.7, 1.0, 1.5, 2.0] {
        for _ in 0..20 {
            let u = DVector::from_vec(rng::standard_normals(&mut rng, 30)).scale(3.0);
            round_trip = round_trip.max((xi(&psi(&u, p), p) - &u).amax());
            round_trip = round_trip.max((psi(&xi(&u, p), p) - &u).amax());
        }
    }

    let mut identity: f64 = 0.0;
    for case in 0..100u64 {
        let mut r = rng::stream(case, Purpose::Diagnostic, 1, 0);
        let (n, m) = (6, 4);
        let a = DMatrix::from_vec(m, n, rng::standard_normals(&mut r, m * n));
        let g = LinearModel::new(a);
        let noise = DVector::from_vec(rng::standard_normals(&mut r, m)).map(|z| 0.1 + z * z);
        let y = DVector::from_vec(rng::standard_normals(&mut r, m));
        let meas = MeasurementModel::diagonal(y.clone(), &noise)?;
        let p = [0.7, 1.0, 1.5, 2.0][(case % 4) as usize];
        let lambda = 0.1 + (case as f64) * 0.37;
        let problem = augment(&g, &meas, RegularizationConfig { p, lambda })?;
        let v = DVector::from_vec(rng::standard_normals(&mut r, n));
        let lhs = problem.misfit(&v)?;
        let rhs = lambda * v.norm_squared() + meas.misfit(&g.evaluate(&psi(&v, p))?)?;
        identity = identity.max((lhs - rhs).abs() / rhs.max(1.0));
    }

    let tikhonov = tikhonov_gap()?;
    outcome(
        round_trip < 1e-12 && identity < 1e-10 && tikhonov < 0.03,
        format!(
            "round trip {round_trip:.2e}; augmented misfit identity {identity:.2e}; p=2 vs closed-form Tikhonov {:.2}%",
            100.0 * tikhonov
        ),
    )
}

/// Relative l2 gap between a large-K p=2 run and the closed-form Tikhonov
/// minimizer on a small linear problem.
fn tikhonov_gap() -> Result<f64> {
    let (n, m, lambda, var) = (8, 5, 0.5, 0.05);
    let g = LinearModel::gaussian(m, n, 3);
    let a = g.matrix().clone();
    let u_true = DVector::from_fn(n, |i, _| (i as f64 * 0.9).sin());
    let y = &a * &u_true;
    let meas = MeasurementModel::isotropic(y.clone(), var)?;
    let cfg = RunConfig {
        ensemble_size: 2000,
        n_iterations: 60,
        rng_seed: 2021,
        sec: SecConfig::disabled(),
        init_mean: DVector::zeros(n),
        init_variance: DVector::from_element(n, 1.0),
    };
    let rec = lp::lp_run(&g, &meas, RegularizationConfig { p: 2.0, lambda }, &cfg, None)?;
    let normal = a.transpose() * &a / var + DMatrix::identity(n, n) * lambda;
    let closed = normal
        .cholesky()
        .expect("normal equations are SPD")
        .solve(&(a.transpose() * &y / var));
    Ok((rec.estimate() - &closed).norm() / closed.norm())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("worked example exactness", worked_example),
        ("subspace theorem pair", subspace_pair),
        ("SEC-off equivalence", sec_off_equivalence),
        ("toy identity problem", toy),
        ("compressive sensing", compressive_sensing),
        ("Lorenz-96 Fourier", lorenz96),
        ("deblurring", deblurring),
        ("Darcy flow", darcy),
        ("correlation sampling stddev", correlation_stddev),
        ("lp machinery", lp_machinery),
    ];
    let mut passed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        passed += usize::from(result.pass);
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {} ({name}): {}", i + 1, result.detail);
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < criteria.len() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
