use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::eki::ForwardModel;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz96Spec {
    pub n_state: usize,
    pub forcing: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Each wavenumber contributes a cosine and a sine coefficient.
    pub measured_wavenumbers: Vec<usize>,
}

impl Default for Lorenz96Spec {
    fn default() -> Self {
        Lorenz96Spec {
            n_state: 40,
            forcing: 8.0,
            dt: 0.01,
            t_final: 0.5,
            measured_wavenumbers: (2..=19).collect(),
        }
    }
}

impl Lorenz96Spec {
    pub fn steps(&self) -> Result<usize> {
        let steps = (self.t_final / self.dt).round();
        if !(self.dt > 0.0) || steps < 1.0 || (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::Argument(format!(
                "t_final {} is not a whole number of steps of {}",
                self.t_final, self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_state < 4 {
            return Err(Error::Argument("lorenz96 needs at least 4 state variables".into()));
        }
        self.steps()?;
        check_wavenumbers(&self.measured_wavenumbers, self.n_state)
    }
}

fn check_wavenumbers(ws: &[usize], n: usize) -> Result<()> {
    // the Nyquist mode has no sine part, so the usable range stops below n/2
    let max = (n - 1) / 2;
    match ws.iter().find(|w| **w == 0 || **w > max) {
        Some(w) => Err(Error::Argument(format!("wavenumber {w} outside 1..={max}"))),
        None => Ok(()),
    }
}

fn tendency(x: &[f64], forcing: f64, out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let xp1 = x[(i + 1) % n];
        let xm1 = x[(i + n - 1) % n];
        let xm2 = x[(i + n - 2) % n];
        out[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
    }
}

/// Classical RK4 integration of the periodic Lorenz-96 system to `t_final`.
pub fn lorenz96_rk4(x0: &DVector<f64>, spec: &Lorenz96Spec) -> Result<DVector<f64>> {
    ensure_dim("lorenz96 state", spec.n_state, x0.len())?;
    let steps = spec.steps()?;
    let n = spec.n_state;
    let dt = spec.dt;
    let mut x = x0.as_slice().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    for _ in 0..steps {
        tendency(&x, spec.forcing, &mut k1);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        tendency(&stage, spec.forcing, &mut k2);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        tendency(&stage, spec.forcing, &mut k3);
        for i in 0..n {
            stage[i] = x[i] + dt * k3[i];
        }
        tendency(&stage, spec.forcing, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("lorenz96 state blew up".into()));
    }
    Ok(DVector::from_vec(x))
}

/// `(2/N) sum_i x_i cos(2 pi w i / N)` and the matching sine, per wavenumber.
pub fn fourier_measure(x: &DVector<f64>, wavenumbers: &[usize]) -> Result<DVector<f64>> {
    let n = x.len();
    check_wavenumbers(wavenumbers, n)?;
    let scale = 2.0 / n as f64;
    let mut out = Vec::with_capacity(2 * wavenumbers.len());
    for &w in wavenumbers {
        let (mut c, mut s) = (0.0, 0.0);
        for (i, xi) in x.iter().enumerate() {
            let theta = 2.0 * PI * ((w * i) % n) as f64 / n as f64;
            c += xi * theta.cos();
            s += xi * theta.sin();
        }
        out.push(scale * c);
        out.push(scale * s);
    }
    Ok(DVector::from_vec(out))
}

/// Initial state to Fourier coefficients of the state at `t_final`.
#[derive(Debug, Clone)]
pub struct Lorenz96Model {
    spec: Lorenz96Spec,
}

impl Lorenz96Model {
    pub fn new(spec: Lorenz96Spec) -> Result<Self> {
        spec.validate()?;
        Ok(Lorenz96Model { spec })
    }

    pub fn spec(&self) -> &Lorenz96Spec {
        &self.spec
    }
}

impl ForwardModel for Lorenz96Model {
    fn input_dim(&self) -> usize {
        self.spec.n_state
    }
    fn output_dim(&self) -> usize {
        2 * self.spec.measured_wavenumbers.len()
    }
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let x = lorenz96_rk4(u, &self.spec)?;
        fourier_measure(&x, &self.spec.measured_wavenumbers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_dt(dt: f64) -> Lorenz96Spec {
        Lorenz96Spec {
            dt,
            ..Lorenz96Spec::default()
        }
    }

    fn perturbed_equilibrium() -> DVector<f64> {
        let mut x = DVector::from_element(40, 8.0);
        x[19] += 1e-3;
        x
    }

    #[test]
    fn equilibrium_is_fixed() {
        let x0 = DVector::from_element(40, 8.0);
        assert_eq!(lorenz96_rk4(&x0, &Lorenz96Spec::default()).unwrap(), x0);
    }

    #[test]
    fn perturbation_grows_and_matches_fine_reference() {
        let x0 = perturbed_equilibrium();
        let coarse = lorenz96_rk4(&x0, &Lorenz96Spec::default()).unwrap();
        let eq = DVector::from_element(40, 8.0);
        assert!((&coarse - &eq).norm() > (&x0 - &eq).norm());
        let fine = lorenz96_rk4(&x0, &with_dt(0.001)).unwrap();
        assert!((coarse - fine).amax() < 1e-6);
    }

    #[test]
    fn fourth_order_convergence() {
        let mut x0 = DVector::from_fn(40, |i, _| 8.0 + (i as f64 * 0.7).sin());
        x0[3] += 1.0;
        let reference = lorenz96_rk4(&x0, &with_dt(0.0025 / 8.0)).unwrap();
        let e1 = (lorenz96_rk4(&x0, &with_dt(0.01)).unwrap() - &reference).norm();
        let e2 = (lorenz96_rk4(&x0, &with_dt(0.005)).unwrap() - &reference).norm();
        let ratio = e1 / e2;
        assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn step_count_must_be_whole() {
        assert_eq!(Lorenz96Spec::default().steps().unwrap(), 50);
        assert!(with_dt(0.03).steps().is_err());
    }

    #[test]
    fn fourier_of_constant_and_pure_modes() {
        let ws: Vec<usize> = (2..=19).collect();
        let c = fourier_measure(&DVector::from_element(40, 3.0), &ws).unwrap();
        assert!(c.amax() < 1e-12);
        assert_eq!(c.len(), 36);

        let x = DVector::from_fn(40, |i, _| (2.0 * PI * 3.0 * i as f64 / 40.0).cos());
        let out = fourier_measure(&x, &ws).unwrap();
        for (j, v) in out.iter().enumerate() {
            if j == 2 {
                assert!((v - 1.0).abs() < 1e-12);
            } else {
                assert!(v.abs() < 1e-12);
            }
        }
        assert!(fourier_measure(&x, &[20]).is_err());
        assert!(fourier_measure(&x, &[0]).is_err());
    }

    #[test]
    fn fourier_matches_dft_bins() {
        let x = DVector::from_fn(40, |i, _| ((i * i) as f64 * 0.13).sin() + 0.2 * i as f64);
        let ws = [1usize, 2, 5, 19];
        let out = fourier_measure(&x, &ws).unwrap();
        for (j, &w) in ws.iter().enumerate() {
            // X_w = sum x_i e^{-2 pi i w k/N}: Re = sum x cos, Im = -sum x sin
            let (mut re, mut im) = (0.0, 0.0);
            for (k, xk) in x.iter().enumerate() {
                let t = -2.0 * PI * (w * k) as f64 / 40.0;
                re += xk * t.cos();
                im += xk * t.sin();
            }
            assert!((out[2 * j] - re / 20.0).abs() < 1e-12);
            assert!((out[2 * j + 1] + im / 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_rows_are_orthogonal() {
        let ws: Vec<usize> = (2..=19).collect();
        let rows: Vec<DVector<f64>> = (0..40)
            .map(|i| {
                let mut e = DVector::zeros(40);
                e[i] = 1.0;
                fourier_measure(&e, &ws).unwrap()
            })
            .collect();
        // column i of the restriction matrix is rows[i]; Gram of its rows:
        for a in 0..36 {
            for b in 0..36 {
                let g: f64 = rows.iter().map(|c| c[a] * c[b]).sum();
                let expected = if a == b { 2.0 / 40.0 } else { 0.0 };
                assert!((g - expected).abs() < 1e-12);
            }
        }
    }
}
