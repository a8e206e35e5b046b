//! Benchmark forward models.

mod blur;
mod darcy;
mod image;
mod lorenz96;

pub use blur::{gaussian_filter, BlurSpec, GaussianBlurModel};
pub use darcy::{
    darcy_observe, darcy_solve, interpolate, observation_points, solve_elliptic, DarcyModel, DarcySpec,
    EllipticProblem, FaceCondition, PressureField,
};
pub use image::{load_pgm, parse_pgm, save_pgm, ImageBuffer};
pub use lorenz96::{fourier_measure, lorenz96_rk4, Lorenz96Model, Lorenz96Spec};

use nalgebra::{DMatrix, DVector};

use crate::eki::ForwardModel;
use crate::error::{ensure_dim, Result};
use crate::rng::{self, Purpose};

/// `G(u) = u`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityModel {
    n: usize,
}

pub fn identity_model(n: usize) -> IdentityModel {
    IdentityModel { n }
}

impl ForwardModel for IdentityModel {
    fn input_dim(&self) -> usize {
        self.n
    }
    fn output_dim(&self) -> usize {
        self.n
    }
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("identity model input", self.n, u.len())?;
        Ok(u.clone())
    }
}

/// `G(u) = A u` for a dense `A`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    a: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>) -> Self {
        LinearModel { a }
    }

    /// `rows x cols` matrix of i.i.d. standard normal entries.
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::SensingMatrix, 0, 0);
        let z = rng::standard_normals(&mut rng, rows * cols);
        LinearModel {
            a: DMatrix::from_row_slice(rows, cols, &z),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

pub fn linear_model(a: DMatrix<f64>) -> LinearModel {
    LinearModel::new(a)
}

impl ForwardModel for LinearModel {
    fn input_dim(&self) -> usize {
        self.a.ncols()
    }
    fn output_dim(&self) -> usize {
        self.a.nrows()
    }
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("linear model input", self.a.ncols(), u.len())?;
        Ok(&self.a * u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_bit_exact() {
        let u = DVector::from_vec(vec![1.0, -0.1, 3.5e-300, f64::MAX]);
        assert_eq!(identity_model(4).evaluate(&u).unwrap(), u);
        assert!(identity_model(3).evaluate(&u).is_err());
    }

    #[test]
    fn linear_matches_double_loop_and_superposes() {
        let model = LinearModel::gaussian(30, 100, 3);
        let a = model.matrix();
        let u = DVector::from_fn(100, |i, _| (i as f64 * 0.37).sin());
        let v = DVector::from_fn(100, |i, _| (i as f64 * 1.1).cos());
        let gu = model.evaluate(&u).unwrap();
        for r in 0..30 {
            let mut s = 0.0;
            for c in 0..100 {
                s += a[(r, c)] * u[c];
            }
            assert!((gu[r] - s).abs() < 1e-13);
        }
        let lhs = model.evaluate(&(&u * 2.0 - &v * 0.5)).unwrap();
        let rhs = gu * 2.0 - model.evaluate(&v).unwrap() * 0.5;
        assert!((lhs - rhs).amax() < 1e-12);
        let eye = linear_model(DMatrix::identity(4, 4));
        let w = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(eye.evaluate(&w).unwrap(), w);
    }

    #[test]
    fn gaussian_matrix_is_seeded_standard_normal() {
        let a = LinearModel::gaussian(100, 100, 1);
        assert_eq!(a.matrix(), LinearModel::gaussian(100, 100, 1).matrix());
        let mean = a.matrix().mean();
        let var = a.matrix().map(|x| (x - mean).powi(2)).mean();
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05);
    }
}
